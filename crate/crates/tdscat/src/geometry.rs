//! Closed-curve geometry: periodic cubic splines through radial knots,
//! analytic test curves, differential quantities, perturbation fields and the
//! two shape regularizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Planar point / vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}
impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}
impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

// --- periodic cubic spline ------------------------------------------------

/// Natural periodic cubic spline on uniform knots q_j = 2 pi j / n.
#[derive(Clone, Debug)]
pub struct PeriodicCubicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
    h: f64,
}

impl PeriodicCubicSpline {
    pub fn interpolate(values: &[f64]) -> PeriodicCubicSpline {
        let n = values.len();
        assert!(n >= 3, "periodic spline needs at least 3 knots");
        let h = TWO_PI / n as f64;
        // cyclic tridiagonal system: M_{j-1} + 4 M_j + M_{j+1} = 6 d2y_j / h^2
        let rhs: Vec<f64> = (0..n)
            .map(|j| {
                let ym = values[(j + n - 1) % n];
                let yp = values[(j + 1) % n];
                6.0 * (ym - 2.0 * values[j] + yp) / (h * h)
            })
            .collect();
        let second = solve_cyclic_tridiag(4.0, 1.0, &rhs);
        PeriodicCubicSpline { values: values.to_vec(), second, h }
    }

    /// Value and first two derivatives at parameter `t` (any real).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.values.len();
        let mut u = t.rem_euclid(TWO_PI) / self.h;
        let mut j = u.floor() as usize;
        if j >= n {
            j = n - 1;
        }
        u = (u - j as f64) * self.h;
        let jp = (j + 1) % n;
        let (yj, yp) = (self.values[j], self.values[jp]);
        let (mj, mp) = (self.second[j], self.second[jp]);
        let b = (yp - yj) / self.h - self.h * (2.0 * mj + mp) / 6.0;
        let c = 0.5 * mj;
        let d = (mp - mj) / (6.0 * self.h);
        let v = yj + u * (b + u * (c + u * d));
        let dv = b + u * (2.0 * c + 3.0 * u * d);
        let ddv = 2.0 * c + 6.0 * d * u;
        (v, dv, ddv)
    }
}

fn solve_cyclic_tridiag(diag: f64, off: f64, rhs: &[f64]) -> Vec<f64> {
    // Sherman-Morrison on top of the Thomas algorithm.
    let n = rhs.len();
    assert!(n >= 3);
    let gamma = -diag;
    let mut d = vec![diag; n];
    d[0] -= gamma;
    d[n - 1] -= off * off / gamma;
    let tri = |d: &[f64], r: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        c[0] = off / d[0];
        x[0] = r[0] / d[0];
        for i in 1..n {
            let m = d[i] - off * c[i - 1];
            c[i] = off / m;
            x[i] = (r[i] - off * x[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let y = tri(&d, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = off;
    let q = tri(&d, &u);
    let vy = y[0] + off / gamma * y[n - 1];
    let vq = q[0] + off / gamma * q[n - 1];
    let f = vy / (1.0 + vq);
    (0..n).map(|i| y[i] - f * q[i]).collect()
}

// --- star-shaped spline parameters -----------------------------------------

/// Star-shaped obstacle: radii at equispaced knot angles around a center.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplineStarShape {
    pub radii: Vec<f64>,
    pub center: Point2,
}

impl SplineStarShape {
    pub fn new(radii: Vec<f64>, center: Point2) -> Result<SplineStarShape> {
        if radii.len() < 4 {
            return Err(Error::InvalidInput(format!("need at least 4 radial knots, got {}", radii.len())));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::InvalidInput(format!("non-positive radius {r}")));
        }
        Ok(SplineStarShape { radii, center })
    }

    pub fn circle(q: usize, radius: f64, center: Point2) -> Result<SplineStarShape> {
        SplineStarShape::new(vec![radius; q], center)
    }

    pub fn knot_count(&self) -> usize {
        self.radii.len()
    }

    pub fn knot_angle(&self, j: usize) -> f64 {
        TWO_PI * j as f64 / self.radii.len() as f64
    }

    /// Interpolation point P_j = r_j (cos q_j, sin q_j) + z.
    pub fn knot_point(&self, j: usize) -> Point2 {
        let q = self.knot_angle(j);
        self.center + Point2::new(q.cos(), q.sin()) * self.radii[j]
    }

    /// Shape with one basis perturbation applied: radial knot bump or center
    /// shift. Exact in the spline family (construction is linear in the data).
    pub fn perturbed(&self, direction: &Direction, eps: f64) -> SplineStarShape {
        let mut s = self.clone();
        match direction {
            Direction::Radial(j) => s.radii[*j] += eps,
            Direction::ShiftX => s.center.x += eps,
            Direction::ShiftY => s.center.y += eps,
        }
        s
    }
}

/// One Gauss-Newton search direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Radial(usize),
    ShiftX,
    ShiftY,
}

// --- closed curves ----------------------------------------------------------

#[derive(Clone, Debug)]
enum CurveKind {
    Circle { radius: f64, center: Point2 },
    Kite,
    Star { sx: PeriodicCubicSpline, sy: PeriodicCubicSpline, shape: SplineStarShape },
}

/// A C^2 closed planar curve with cached samples on a uniform parameter grid.
///
/// All constructions are counterclockwise (positive enclosed area); the cached
/// normals point out of the enclosed domain.
#[derive(Clone, Debug)]
pub struct ClosedCurve {
    kind: CurveKind,
    n: usize,
    pub(crate) theta: Vec<f64>,
    pub(crate) point: Vec<Point2>,
    pub(crate) deriv: Vec<Point2>,
    pub(crate) speed: Vec<f64>,
    pub(crate) normal: Vec<Point2>,
    pub(crate) curvature: Vec<f64>,
}

impl ClosedCurve {
    pub fn circle(radius: f64, center: Point2, n_samples: usize) -> Result<ClosedCurve> {
        if radius <= 0.0 {
            return Err(Error::InvalidInput(format!("circle radius {radius} must be positive")));
        }
        Ok(Self::build(CurveKind::Circle { radius, center }, n_samples))
    }

    /// The kite-shaped test obstacle.
    pub fn kite(n_samples: usize) -> ClosedCurve {
        Self::build(CurveKind::Kite, n_samples)
    }

    /// Periodic cubic spline through the radial knot points of `shape`.
    pub fn star(shape: &SplineStarShape, n_samples: usize) -> Result<ClosedCurve> {
        SplineStarShape::new(shape.radii.clone(), shape.center)?;
        let q = shape.knot_count();
        let xs: Vec<f64> = (0..q).map(|j| shape.knot_point(j).x).collect();
        let ys: Vec<f64> = (0..q).map(|j| shape.knot_point(j).y).collect();
        let kind = CurveKind::Star {
            sx: PeriodicCubicSpline::interpolate(&xs),
            sy: PeriodicCubicSpline::interpolate(&ys),
            shape: shape.clone(),
        };
        Ok(Self::build(kind, n_samples))
    }

    fn build(kind: CurveKind, n: usize) -> ClosedCurve {
        assert!(n >= 8, "need at least 8 samples");
        let mut curve = ClosedCurve {
            kind,
            n,
            theta: Vec::with_capacity(n),
            point: Vec::with_capacity(n),
            deriv: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
            normal: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
        };
        for i in 0..n {
            let t = TWO_PI * i as f64 / n as f64;
            let (p, d1, d2) = curve.eval(t);
            let sp = d1.norm();
            debug_assert!(sp > 0.0, "degenerate parametrization at t={t}");
            curve.theta.push(t);
            curve.point.push(p);
            curve.deriv.push(d1);
            curve.speed.push(sp);
            curve.normal.push(Point2::new(d1.y / sp, -d1.x / sp));
            curve.curvature.push((d1.x * d2.y - d1.y * d2.x) / (sp * sp * sp));
        }
        debug_assert!(curve.signed_area() > 0.0, "curve must be counterclockwise");
        curve
    }

    /// Position and first two derivatives at any parameter value.
    pub fn eval(&self, t: f64) -> (Point2, Point2, Point2) {
        match &self.kind {
            CurveKind::Circle { radius, center } => {
                let (c, s) = (t.cos(), t.sin());
                (
                    *center + Point2::new(c, s) * *radius,
                    Point2::new(-s, c) * *radius,
                    Point2::new(-c, -s) * *radius,
                )
            }
            CurveKind::Kite => {
                let (c, s) = (t.cos(), t.sin());
                let (c2, s2) = ((2.0 * t).cos(), (2.0 * t).sin());
                (
                    Point2::new(-2.25 * s, 1.5 * (c + 0.65 * c2 - 0.65)),
                    Point2::new(-2.25 * c, 1.5 * (-s - 1.3 * s2)),
                    Point2::new(2.25 * s, 1.5 * (-c - 2.6 * c2)),
                )
            }
            CurveKind::Star { sx, sy, .. } => {
                let (x, dx, ddx) = sx.eval(t);
                let (y, dy, ddy) = sy.eval(t);
                (Point2::new(x, y), Point2::new(dx, dy), Point2::new(ddx, ddy))
            }
        }
    }

    /// Frame at parameter t: (point, tangent, outward unit normal, speed, curvature).
    pub fn frame(&self, t: f64) -> Result<(Point2, Point2, Point2, f64, f64)> {
        let (p, d1, d2) = self.eval(t);
        let sp = d1.norm();
        if sp == 0.0 {
            return Err(Error::InvalidInput(format!("degenerate parametrization at t = {t}")));
        }
        let nu = Point2::new(d1.y / sp, -d1.x / sp);
        let kappa = (d1.x * d2.y - d1.y * d2.x) / (sp * sp * sp);
        Ok((p, d1, nu, sp, kappa))
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[Point2] {
        &self.point
    }

    pub fn normals(&self) -> &[Point2] {
        &self.normal
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speed
    }

    pub fn star_shape(&self) -> Option<&SplineStarShape> {
        match &self.kind {
            CurveKind::Star { shape, .. } => Some(shape),
            _ => None,
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.speed.iter().cloned().fold(0.0, f64::max)
    }

    /// Upper bound for pairwise boundary distances (bounding-box diagonal).
    pub fn diameter_bound(&self) -> f64 {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &self.point {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        (xmax - xmin).hypot(ymax - ymin)
    }

    pub fn min_distance_to(&self, z: Point2) -> f64 {
        self.point.iter().map(|p| p.dist(z)).fold(f64::MAX, f64::min)
    }

    /// Signed enclosed area (trapezoidal rule; spectral for smooth curves).
    pub fn signed_area(&self) -> f64 {
        let h = TWO_PI / self.n as f64;
        let mut a = 0.0;
        for i in 0..self.n {
            a += self.point[i].x * self.deriv[i].y - self.point[i].y * self.deriv[i].x;
        }
        0.5 * a * h
    }

    /// Area centroid of the enclosed region, via boundary integrals.
    pub fn centroid(&self) -> Result<Point2> {
        let area = self.signed_area();
        if area <= 0.0 {
            return Err(Error::InvalidInput(format!("non-positive enclosed area {area}")));
        }
        let h = TWO_PI / self.n as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..self.n {
            cx += self.point[i].x * self.point[i].x * self.deriv[i].y;
            cy -= self.point[i].y * self.point[i].y * self.deriv[i].x;
        }
        Ok(Point2::new(0.5 * cx * h / area, 0.5 * cy * h / area))
    }
}

/// Builds the spline curve for a set of radii and center.
pub fn build_spline(radii: &[f64], center: Point2, n_samples: usize) -> Result<ClosedCurve> {
    let shape = SplineStarShape::new(radii.to_vec(), center)?;
    ClosedCurve::star(&shape, n_samples)
}

/// The kite curve p(t) = (-2.25 sin t, 1.5 (cos t + 0.65 cos 2t - 0.65)).
pub fn kite_curve(n_samples: usize) -> ClosedCurve {
    ClosedCurve::kite(n_samples)
}

/// Total squared curvature along the curve: integral of kappa^2 |p'|.
pub fn curvature_penalty(curve: &ClosedCurve) -> f64 {
    let h = TWO_PI / curve.n as f64;
    (0..curve.n).map(|i| curve.curvature[i] * curve.curvature[i] * curve.speed[i]).sum::<f64>() * h
}

/// Squared distance between the area centroid and the query point.
pub fn center_penalty(curve: &ClosedCurve, z: Point2) -> Result<f64> {
    let c = curve.centroid()?;
    Ok((c - z).dot(c - z))
}

// --- perturbation basis -----------------------------------------------------

/// Normal components (h . nu) of the Q+2 search direction fields, sampled on
/// the curve grid. Directions 0..Q are radial cardinal-spline bumps, the last
/// two are the unit center shifts.
#[derive(Clone, Debug)]
pub struct PerturbationBasis {
    pub directions: Vec<Direction>,
    /// hnu[j][i]: (h_j . nu)(theta_i)
    pub hnu: Vec<Vec<f64>>,
}

impl PerturbationBasis {
    pub fn count(&self) -> usize {
        self.directions.len()
    }
}

pub fn perturbation_basis(shape: &SplineStarShape, curve: &ClosedCurve) -> PerturbationBasis {
    let q = shape.knot_count();
    let n = curve.samples();
    let mut directions = Vec::with_capacity(q + 2);
    let mut hnu = Vec::with_capacity(q + 2);
    for j in 0..q {
        // cardinal spline B_j through the Kronecker data, radial direction
        let mut e = vec![0.0; q];
        e[j] = 1.0;
        let b = PeriodicCubicSpline::interpolate(&e);
        let qa = shape.knot_angle(j);
        let dir = Point2::new(qa.cos(), qa.sin());
        let row: Vec<f64> = (0..n).map(|i| b.eval(curve.theta[i]).0 * dir.dot(curve.normal[i])).collect();
        directions.push(Direction::Radial(j));
        hnu.push(row);
    }
    for (dir, axis) in [(Direction::ShiftX, Point2::new(1.0, 0.0)), (Direction::ShiftY, Point2::new(0.0, 1.0))] {
        let row: Vec<f64> = (0..n).map(|i| axis.dot(curve.normal[i])).collect();
        directions.push(dir);
        hnu.push(row);
    }
    PerturbationBasis { directions, hnu }
}

// --- polygon utilities -------------------------------------------------------

/// Dense polyline of the curve with `m` vertices.
pub fn polyline(curve: &ClosedCurve, m: usize) -> Vec<Point2> {
    (0..m).map(|i| curve.eval(TWO_PI * i as f64 / m as f64).0).collect()
}

/// Shoelace area of a polygon.
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

/// Shoelace centroid of a polygon (independent check for the boundary-integral
/// centroid).
pub fn polygon_centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len();
    let a = polygon_area(pts);
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let w = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point2::new(cx / (6.0 * a), cy / (6.0 * a))
}

fn row_crossings(pts: &[Point2], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = pts.len();
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        if (p.y <= y && q.y > y) || (q.y <= y && p.y > y) {
            out.push(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Area of the symmetric difference of two polygons by horizontal scanlines.
pub fn symmetric_difference_area(a: &[Point2], b: &[Point2], rows: usize) -> f64 {
    let ys: Vec<f64> = a.iter().chain(b.iter()).map(|p| p.y).collect();
    let ymin = ys.iter().cloned().fold(f64::MAX, f64::min);
    let ymax = ys.iter().cloned().fold(f64::MIN, f64::max);
    let dy = (ymax - ymin) / rows as f64;
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    let mut total = 0.0;
    for r in 0..rows {
        let y = ymin + (r as f64 + 0.5) * dy;
        row_crossings(a, y, &mut xa);
        row_crossings(b, y, &mut xb);
        // measure of the XOR of the two interval unions
        let mut events: Vec<(f64, u8)> = xa.iter().map(|&x| (x, 0u8)).chain(xb.iter().map(|&x| (x, 1u8))).collect();
        events.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        let (mut in_a, mut in_b) = (false, false);
        let mut last = f64::NAN;
        for (x, which) in events {
            if !last.is_nan() && (in_a != in_b) {
                total += (x - last) * dy;
            }
            if which == 0 {
                in_a = !in_a;
            } else {
                in_b = !in_b;
            }
            last = x;
        }
    }
    total
}

/// Radial interpolation of an arbitrary star-shaped curve: the radii at the
/// knot angles of a Q-knot star shape centered at `center`.
pub fn fit_star_shape(curve: &ClosedCurve, center: Point2, q: usize) -> Result<SplineStarShape> {
    let poly = polyline(curve, 4096);
    let inside = |p: Point2| -> bool {
        let mut wind = false;
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a.y <= p.y && b.y > p.y) || (b.y <= p.y && a.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    wind = !wind;
                }
            }
        }
        wind
    };
    if !inside(center) {
        return Err(Error::InvalidInput("star center lies outside the curve".into()));
    }
    let rmax = poly.iter().map(|p| p.dist(center)).fold(0.0, f64::max) * 1.5;
    let mut radii = Vec::with_capacity(q);
    for j in 0..q {
        let ang = TWO_PI * j as f64 / q as f64;
        let dir = Point2::new(ang.cos(), ang.sin());
        let (mut lo, mut hi) = (1e-9, rmax);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside(center + dir * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        radii.push(0.5 * (lo + hi));
    }
    SplineStarShape::new(radii, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn spline_interpolates_and_is_periodic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let radii: Vec<f64> = (0..17).map(|_| rng.gen_range(0.5..2.0)).collect();
        let shape = SplineStarShape::new(radii, Point2::new(0.3, -0.2)).unwrap();
        let curve = ClosedCurve::star(&shape, 128).unwrap();
        for j in 0..shape.knot_count() {
            let p = curve.eval(shape.knot_angle(j)).0;
            assert!(p.dist(shape.knot_point(j)) < 1e-12);
        }
        // C2 continuity across a knot
        let t = shape.knot_angle(5);
        for eps in [1e-7] {
            let (_, d1m, d2m) = curve.eval(t - eps);
            let (_, d1p, d2p) = curve.eval(t + eps);
            assert!((d1m - d1p).norm() < 1e-5);
            assert!((d2m - d2p).norm() < 1e-4);
        }
        // 2 pi periodicity
        let (a, _, _) = curve.eval(0.7);
        let (b, _, _) = curve.eval(0.7 + TWO_PI);
        assert!(a.dist(b) < 1e-13);
    }

    #[test]
    fn spline_circle_stays_near_circle() {
        let shape = SplineStarShape::circle(40, 1.0, Point2::new(0.0, 0.0)).unwrap();
        let curve = ClosedCurve::star(&shape, 512).unwrap();
        let max_dev = curve.point.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
        assert!(max_dev < 1e-3, "max radial deviation {max_dev}");
    }

    #[test]
    fn spline_translation_equivariance() {
        let radii = vec![1.0; 12];
        let a = build_spline(&radii, Point2::new(0.0, 0.0), 64).unwrap();
        let b = build_spline(&radii, Point2::new(2.0, -1.0), 64).unwrap();
        for i in 0..64 {
            let d = b.point[i] - a.point[i];
            assert!((d.x - 2.0).abs() < 1e-13 && (d.y + 1.0).abs() < 1e-13);
        }
        assert!((curvature_penalty(&a) - curvature_penalty(&b)).abs() < 1e-10);
    }

    #[test]
    fn kite_endpoints() {
        let k = kite_curve(64);
        let (p0, _, _) = k.eval(0.0);
        assert!(p0.dist(Point2::new(0.0, 1.5)) < 1e-14);
        let (p1, _, _) = k.eval(std::f64::consts::FRAC_PI_2);
        assert!(p1.dist(Point2::new(-2.25, -1.95)) < 1e-13);
        let (p2, _, _) = k.eval(std::f64::consts::PI);
        assert!(p2.dist(Point2::new(0.0, -1.5)) < 1e-13);
        assert!(k.signed_area() > 0.0);
    }

    #[test]
    fn frame_on_circle_and_kite() {
        let c = ClosedCurve::circle(2.0, Point2::new(0.0, 0.0), 64).unwrap();
        let (_, _, nu, _, kappa) = c.frame(0.0).unwrap();
        assert!(nu.dist(Point2::new(1.0, 0.0)) < 1e-14);
        assert!((kappa - 0.5).abs() < 1e-13);

        // curvature by central finite differences on the kite
        let k = kite_curve(64);
        let t = 0.0;
        let h = 1e-5;
        let (pm, _, _) = k.eval(t - h);
        let (p0, d1, _) = k.eval(t);
        let (pp, _, _) = k.eval(t + h);
        let d2 = Point2::new((pm.x - 2.0 * p0.x + pp.x) / (h * h), (pm.y - 2.0 * p0.y + pp.y) / (h * h));
        let sp = d1.norm();
        let kappa_fd = (d1.x * d2.y - d1.y * d2.x) / (sp * sp * sp);
        let (_, _, _, _, kappa) = k.frame(t).unwrap();
        assert!((kappa - kappa_fd).abs() < 1e-6, "{kappa} vs {kappa_fd}");
    }

    #[test]
    fn analytic_vs_fd_derivatives() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let radii: Vec<f64> = (0..10).map(|_| rng.gen_range(0.8..1.6)).collect();
        let spline = build_spline(&radii, Point2::new(0.1, 0.1), 64).unwrap();
        let kite = kite_curve(64);
        for curve in [&spline, &kite] {
            for _ in 0..20 {
                let t: f64 = rng.gen_range(0.0..TWO_PI);
                let h = 1e-5;
                let (pm, _, _) = curve.eval(t - h);
                let (_, d1, _) = curve.eval(t);
                let (pp, _, _) = curve.eval(t + h);
                let fd = Point2::new((pp.x - pm.x) / (2.0 * h), (pp.y - pm.y) / (2.0 * h));
                assert!((fd - d1).norm() < 1e-6 * (1.0 + d1.norm()));
            }
        }
    }

    #[test]
    fn curvature_penalty_circle_values() {
        let c2 = ClosedCurve::circle(2.0, Point2::new(0.4, 0.0), 256).unwrap();
        assert!((curvature_penalty(&c2) - std::f64::consts::PI).abs() < 1e-6);
        let ch = ClosedCurve::circle(0.5, Point2::new(0.0, 0.0), 256).unwrap();
        assert!((curvature_penalty(&ch) - 4.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn curvature_penalty_scaling_on_spline_circles() {
        let base = SplineStarShape::circle(40, 1.0, Point2::new(0.0, 0.0)).unwrap();
        let scaled = SplineStarShape::circle(40, 2.0, Point2::new(0.0, 0.0)).unwrap();
        let p1 = curvature_penalty(&ClosedCurve::star(&base, 512).unwrap());
        let p2 = curvature_penalty(&ClosedCurve::star(&scaled, 512).unwrap());
        assert!((p2 - 0.5 * p1).abs() < 1e-4 * p1);
    }

    #[test]
    fn kite_penalty_grid_converged() {
        let a = curvature_penalty(&kite_curve(512));
        let b = curvature_penalty(&kite_curve(1024));
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn centroid_matches_polygon_oracle() {
        let k = kite_curve(512);
        let c = k.centroid().unwrap();
        let oracle = polygon_centroid(&polyline(&k, 200_000));
        assert!(c.dist(oracle) < 1e-6, "{c:?} vs {oracle:?}");
        // circle centered at z has zero penalty; shifted circle has |shift|^2
        let z = Point2::new(0.5, -0.25);
        let circ = ClosedCurve::circle(1.0, z, 128).unwrap();
        assert!(center_penalty(&circ, z).unwrap() < 1e-20);
        let shifted = ClosedCurve::circle(1.0, z + Point2::new(1.0, 0.0), 128).unwrap();
        assert!((center_penalty(&shifted, z).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn center_penalty_translation_equivariance() {
        let radii: Vec<f64> = (0..12).map(|j| 1.0 + 0.2 * (j as f64).sin()).collect();
        let z0 = Point2::new(0.0, 0.0);
        let dz = Point2::new(1.3, -0.8);
        let a = build_spline(&radii, z0, 1024).unwrap();
        let b = build_spline(&radii, z0 + dz, 1024).unwrap();
        let q = Point2::new(0.2, 0.1);
        let pa = center_penalty(&a, q).unwrap();
        let pb = center_penalty(&b, q + dz).unwrap();
        // trapezoid on a C^2 spline carries O(h^3) quadrature error which does
        // not cancel exactly under translation
        assert!((pa - pb).abs() < 1e-8);
    }

    #[test]
    fn perturbation_basis_properties() {
        let q = 40;
        let n = 320;
        let shape = SplineStarShape::circle(q, 1.0, Point2::new(0.0, 0.0)).unwrap();
        let curve = ClosedCurve::star(&shape, n).unwrap();
        let basis = perturbation_basis(&shape, &curve);
        assert_eq!(basis.count(), q + 2);
        // cardinal property at the knots: B_j(q_k) = delta_jk, and on the circle
        // the radial field is aligned with the normal at its own knot
        for j in (0..q).step_by(7) {
            let i = j * n / q; // knot angle falls on the sample grid
            assert!((basis.hnu[j][i] - 1.0).abs() < 1e-6, "j={j} got {}", basis.hnu[j][i]);
            for k in 0..q {
                if k != j {
                    let ik = k * n / q;
                    assert!(basis.hnu[j][ik].abs() < 1e-10);
                }
            }
        }
        // center-shift directions on the (splined) unit circle: h.nu ~ cos, sin
        for i in 0..n {
            let t = curve.theta[i];
            assert!((basis.hnu[q][i] - t.cos()).abs() < 1e-4);
            assert!((basis.hnu[q + 1][i] - t.sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn symmetric_difference_of_shifted_squares() {
        let sq = |cx: f64| {
            vec![
                Point2::new(cx - 1.0, -1.0),
                Point2::new(cx + 1.0, -1.0),
                Point2::new(cx + 1.0, 1.0),
                Point2::new(cx - 1.0, 1.0),
            ]
        };
        let d = symmetric_difference_area(&sq(0.0), &sq(0.5), 4000);
        assert!((d - 2.0).abs() < 2e-3, "{d}");
        let zero = symmetric_difference_area(&sq(0.0), &sq(0.0), 1000);
        assert!(zero.abs() < 1e-12);
    }

    #[test]
    fn star_fit_recovers_circle() {
        let c = ClosedCurve::circle(1.5, Point2::new(0.2, -0.1), 256).unwrap();
        let shape = fit_star_shape(&c, Point2::new(0.2, -0.1), 16).unwrap();
        for r in &shape.radii {
            assert!((r - 1.5).abs() < 1e-3, "{r}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SplineStarShape::new(vec![1.0, 1.0, 1.0], Point2::new(0.0, 0.0)).is_err());
        assert!(SplineStarShape::new(vec![1.0, -0.1, 1.0, 1.0], Point2::new(0.0, 0.0)).is_err());
        assert!(ClosedCurve::circle(0.0, Point2::new(0.0, 0.0), 64).is_err());
    }
}
