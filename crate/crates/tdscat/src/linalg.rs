//! Dense linear algebra: complex LU through the system LAPACK, plus a small
//! pivoted solver for the real normal equations of the reconstruction step.

use num_complex::Complex64;

use crate::error::{Error, Result};

extern "C" {
    fn zgetrf_(m: *const i32, n: *const i32, a: *mut Complex64, lda: *const i32, ipiv: *mut i32, info: *mut i32);
    fn zgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const Complex64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut Complex64,
        ldb: *const i32,
        info: *mut i32,
    );
}

/// LU factorization (partial pivoting) of a dense complex matrix, column-major.
pub struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    ipiv: Vec<i32>,
    /// min/max modulus ratio of the U diagonal; crude conditioning indicator.
    pub diag_ratio: f64,
}

impl ComplexLu {
    /// Factorizes `a` (n x n, column-major). Fails on exact singularity or a
    /// diagonal ratio at roundoff level.
    pub fn factorize(mut a: Vec<Complex64>, n: usize, context: &'static str) -> Result<ComplexLu> {
        assert_eq!(a.len(), n * n);
        let ni = n as i32;
        let mut ipiv = vec![0i32; n];
        let mut info = 0i32;
        unsafe { zgetrf_(&ni, &ni, a.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info) };
        if info != 0 {
            return Err(Error::Singular { context, cond: f64::INFINITY });
        }
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0f64;
        for i in 0..n {
            let d = a[i + i * n].norm();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        let diag_ratio = dmax / dmin.max(f64::MIN_POSITIVE);
        if !diag_ratio.is_finite() || diag_ratio > 1e15 {
            return Err(Error::Singular { context, cond: diag_ratio });
        }
        Ok(ComplexLu { n, lu: a, ipiv, diag_ratio })
    }

    /// Solves A x = b for a single right-hand side.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_many_in_place(&mut x, 1);
        x
    }

    /// Solves A X = B for `nrhs` right-hand sides stored contiguously
    /// (column-major, each column one rhs). One LAPACK call for all columns.
    pub fn solve_many_in_place(&self, b: &mut [Complex64], nrhs: usize) {
        assert_eq!(b.len(), self.n * nrhs);
        let ni = self.n as i32;
        let nrhsi = nrhs as i32;
        let mut info = 0i32;
        unsafe {
            zgetrs_(b"N".as_ptr(), &ni, &nrhsi, self.lu.as_ptr(), &ni, self.ipiv.as_ptr(), b.as_mut_ptr(), &ni, &mut info)
        };
        debug_assert_eq!(info, 0);
    }

    pub fn size(&self) -> usize {
        self.n
    }
}

/// Solves the real symmetric positive (semi)definite system via Gaussian
/// elimination with partial pivoting. Used for (Q+2)-sized normal equations.
pub fn solve_real(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m: Vec<f64> = a.to_vec(); // row-major working copy
    let mut x = b.to_vec();
    for k in 0..n {
        let mut piv = k;
        let mut best = m[k * n + k].abs();
        for r in k + 1..n {
            let v = m[r * n + k].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < 1e-300 {
            return Err(Error::Singular { context: "normal equations", cond: f64::INFINITY });
        }
        if piv != k {
            for c in 0..n {
                m.swap(k * n + c, piv * n + c);
            }
            x.swap(k, piv);
        }
        let d = m[k * n + k];
        for r in k + 1..n {
            let f = m[r * n + k] / d;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                m[r * n + c] -= f * m[k * n + c];
            }
            x[r] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for c in k + 1..n {
            s -= m[k * n + c] * x[c];
        }
        x[k] = s / m[k * n + k];
    }
    Ok(x)
}
