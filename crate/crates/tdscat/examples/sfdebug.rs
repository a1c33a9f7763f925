use num_complex::Complex64;
use tdscat::geometry::*;
use tdscat::helm2d::*;
use tdscat::incident::*;
use tdscat::rkcq::*;
use tdscat::timedomain::*;
fn main() {
    // worst-node probe on the kite
    let kite = kite_curve(128);
    let ctx = AssemblyContext::new(&kite).unwrap();
    let tab = radau_tableau(2).unwrap();
    let grid = build_grid(&tab, 20.0 / 256.0, 256).unwrap();
    let g: Vec<Complex64> = (0..128).map(|j| Complex64::new((0.3 * j as f64).cos(), 0.1)).collect();
    let mut worst = 0.0f64; let mut at = Complex64::new(0.0,0.0);
    for l in 0..=128 {
        for k in 0..2 {
            let s = grid.nodes[l].eigenvalues[k];
            let w = assemble_v(s, &ctx).unwrap();
            let mu = w.solve_dirichlet(&g).unwrap();
            let scale = mu.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if scale > worst { worst = scale; at = s; }
        }
    }
    println!("worst |mu| {worst:.3e} at s = {:.2}+{:.2}i", at.re, at.im);
    // end-to-end scenes again
    for (nm, curve, t_final, n, ns) in [
        ("circle", ClosedCurve::circle(1.0, Point2::new(0.0,0.0), 48).unwrap(), 12.0, 192usize, 48usize),
        ("kite", kite_curve(128), 20.0, 256, 128),
    ] {
        let _ = ns;
        let scene = Scene { curve, receivers: vec![Point2::new(3.0, 0.0), Point2::new(6.0, 0.0)],
            incident: IncidentWave::reference_bump_plane(), final_time: t_final };
        let grid = build_grid(&tab, t_final / n as f64, n).unwrap();
        let u = forward(&scene, &grid).unwrap();
        let d = Point2::new(1.0/2.0f64.sqrt(), 1.0/2.0f64.sqrt());
        for (j, z) in scene.receivers.iter().enumerate() {
            let mut arrival = f64::MAX;
            for p in scene.curve.points() {
                let onset = (p.dot(d) + 4.0 - 1.0/3.0).min(p.dot(d) + 6.0 - 1.0);
                arrival = arrival.min(onset + p.dist(*z));
            }
            let peak = u.channels[j].iter().map(|v| v.abs()).fold(0.0, f64::max);
            let pre: f64 = (1..=u.steps()).filter(|&nn| (nn as f64) * grid.tau < arrival - 4.0 * grid.tau)
                .map(|nn| u.channels[j][nn-1].abs()).fold(0.0, f64::max);
            println!("{nm} recv{j}: peak {peak:.4e} pre-arrival(4tau margin) {pre:.3e} ratio {:.3e}", pre/peak);
        }
    }
}
