fn main() {
    // Dense complex LU goes through the system LAPACK (zgetrf/zgetrs).
    println!("cargo:rustc-link-lib=openblas");
}
