//! Incident waves: traveling bump-pulse plane waves and causal point-source
//! superpositions, with boundary-trace sampling at the CQ stage times.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ClosedCurve, Point2};
use crate::quad;
use crate::rkcq::{CqGrid, StageSequence};

/// One traveling pulse term: sign * f(scale (x.d - t + delay)).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlanePulse {
    pub scale: f64,
    pub delay: f64,
    pub sign: f64,
}

/// Temporal profile of a point-source emission: f(t) = bump((t - center)/halfwidth).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SourcePulse {
    pub center: f64,
    pub halfwidth: f64,
}

impl Default for SourcePulse {
    fn default() -> Self {
        SourcePulse { center: 1.0, halfwidth: 0.5 }
    }
}

/// Incident-wave specification.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IncidentWave {
    BumpPlane { direction: Point2, pulses: Vec<PlanePulse> },
    PointSources { sources: Vec<Point2>, pulse: SourcePulse },
}

impl IncidentWave {
    /// The two-pulse plane wave of the reference experiments:
    /// f(3(x.d - t + 4)) - f(x.d - t + 6) with d = (1,1)/sqrt(2).
    pub fn reference_bump_plane() -> IncidentWave {
        let inv = 1.0 / 2.0f64.sqrt();
        IncidentWave::BumpPlane {
            direction: Point2::new(inv, inv),
            pulses: vec![
                PlanePulse { scale: 3.0, delay: 4.0, sign: 1.0 },
                PlanePulse { scale: 1.0, delay: 6.0, sign: -1.0 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IncidentWave::BumpPlane { direction, pulses } => {
                if (direction.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "plane-wave direction must be a unit vector, |d| = {}",
                        direction.norm()
                    )));
                }
                if pulses.is_empty() {
                    return Err(Error::InvalidInput("bump-plane wave needs at least one pulse".into()));
                }
                for p in pulses {
                    if p.scale <= 0.0 {
                        return Err(Error::InvalidInput(format!("pulse scale {} must be positive", p.scale)));
                    }
                }
            }
            IncidentWave::PointSources { sources, pulse } => {
                if sources.is_empty() {
                    return Err(Error::InvalidInput("point-source wave needs at least one source".into()));
                }
                if pulse.halfwidth <= 0.0 || pulse.center - pulse.halfwidth < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "source pulse must have positive halfwidth and support in t > 0, got center {} halfwidth {}",
                        pulse.center, pulse.halfwidth
                    )));
                }
            }
        }
        Ok(())
    }

    /// u^i(x, t).
    pub fn eval(&self, x: Point2, t: f64) -> Result<f64> {
        match self {
            IncidentWave::BumpPlane { direction, pulses } => {
                let phase = x.dot(*direction) - t;
                Ok(pulses.iter().map(|p| p.sign * bump_profile(p.scale * (phase + p.delay))).sum())
            }
            IncidentWave::PointSources { sources, pulse } => {
                let mut total = 0.0;
                for &zj in sources {
                    let r = x.dist(zj);
                    if r < 1e-12 {
                        return Err(Error::InvalidInput(format!("incident wave evaluated at a source point ({}, {})", zj.x, zj.y)));
                    }
                    total += source_term(r, t, pulse);
                }
                Ok(total)
            }
        }
    }

    /// Boundary trace sampled at all stage times of the grid; dimension is the
    /// curve sample count.
    pub fn boundary_trace(&self, curve: &ClosedCurve, grid: &CqGrid) -> Result<StageSequence> {
        self.validate()?;
        let n_s = curve.samples();
        let m = grid.stages();
        let mut seq = StageSequence::zeros(grid.steps, m, n_s);
        for n in 0..=grid.steps {
            for k in 0..m {
                let t = grid.stage_time(n, k);
                let row = seq.stage_mut(n, k);
                for (i, p) in curve.points().iter().enumerate() {
                    row[i] = Complex64::new(self.eval(*p, t)?, 0.0);
                }
            }
        }
        Ok(seq)
    }

    /// Checks that the wave is numerically absent from the boundary for all
    /// t in [-margin, 0]; returns the first violation when it is not.
    pub fn causality_check(&self, curve: &ClosedCurve, margin: f64) -> CausalityReport {
        let samples = 257;
        let mut worst: Option<(f64, f64, f64)> = None;
        for it in 0..samples {
            let t = -margin + margin * it as f64 / (samples - 1) as f64;
            for (i, p) in curve.points().iter().enumerate() {
                let v = match self.eval(*p, t) {
                    Ok(v) => v.abs(),
                    Err(_) => f64::INFINITY,
                };
                if v > 1e-14 && worst.map(|w| v > w.2).unwrap_or(true) {
                    let theta = crate::geometry::TWO_PI * i as f64 / curve.samples() as f64;
                    worst = Some((t, theta, v));
                }
            }
        }
        match worst {
            None => CausalityReport { pass: true, first_violation: None },
            Some((t, theta, magnitude)) => CausalityReport { pass: false, first_violation: Some((t, theta, magnitude)) },
        }
    }
}

/// Outcome of the pre-simulation causality validation.
#[derive(Clone, Copy, Debug)]
pub struct CausalityReport {
    pub pass: bool,
    /// (time, boundary parameter, |u^i|) of the largest violation
    pub first_violation: Option<(f64, f64, f64)>,
}

/// C-infinity bump: exp(-1/(1-t^2)) inside |t| < 1, zero outside.
/// Returns exactly 0 once the exponent would underflow.
pub fn bump_profile(t: f64) -> f64 {
    let w = 1.0 - t * t;
    if w <= 0.0 {
        return 0.0;
    }
    let e = -1.0 / w;
    if e < -700.0 {
        0.0
    } else {
        e.exp()
    }
}

/// One causal 2D source emission: H(t/r - 1) integral_0^{acosh(t/r)}
/// f(t - r cosh theta) d theta, with the integration clipped to the support
/// of the pulse before quadrature.
fn source_term(r: f64, t: f64, pulse: &SourcePulse) -> f64 {
    if t <= r {
        return 0.0;
    }
    let (c, w) = (pulse.center, pulse.halfwidth);
    // argument t - r cosh(theta) must lie in (c - w, c + w)
    let lo_cosh = ((t - c - w) / r).max(1.0);
    let hi_cosh = ((t - c + w) / r).min(t / r);
    if hi_cosh <= lo_cosh {
        return 0.0;
    }
    let lo = lo_cosh.acosh();
    let hi = hi_cosh.acosh();
    quad::adaptive_gk(|theta| bump_profile((t - r * theta.cosh() - c) / w), lo, hi, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rkcq::{build_grid, radau_tableau};

    #[test]
    fn bump_values_and_support() {
        assert!((bump_profile(0.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(bump_profile(1.0), 0.0);
        assert_eq!(bump_profile(-1.2), 0.0);
        // underflow boundary: inside the support but beyond exp range
        assert_eq!(bump_profile(0.9999999), 0.0);
        assert!(bump_profile(0.999) > 0.0);
    }

    #[test]
    fn plane_wave_values() {
        let wave = IncidentWave::reference_bump_plane();
        let d = 1.0 / 2.0f64.sqrt();
        // x.d = t - 4: first pulse at f(0) = e^{-1}, second at f(2) = 0
        let t = 5.0;
        let proj = t - 4.0;
        let x = Point2::new(proj / (2.0 * d), proj / (2.0 * d));
        let v = wave.eval(x, t).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        // both pulse arguments outside the supports
        let far = wave.eval(Point2::new(30.0, 30.0), 0.0).unwrap();
        assert_eq!(far, 0.0);
        // value depends on x.d - t only
        let (x1, t1) = (Point2::new(1.0, 2.0), 0.7);
        let shift = 1.3;
        let x2 = Point2::new(x1.x + shift * d, x1.y + shift * d);
        let v1 = wave.eval(x1, t1).unwrap();
        let v2 = wave.eval(x2, t1 + shift).unwrap();
        assert!((v1 - v2).abs() < 1e-15);
    }

    #[test]
    fn plane_wave_satisfies_wave_equation() {
        let wave = IncidentWave::reference_bump_plane();
        let h = 1e-3;
        for (x, t) in [(Point2::new(2.2, 1.4), 1.3), (Point2::new(-1.0, 0.5), 2.1)] {
            let u = |p: Point2, tt: f64| wave.eval(p, tt).unwrap();
            let dtt = (u(x, t + h) - 2.0 * u(x, t) + u(x, t - h)) / (h * h);
            let lap = (u(Point2::new(x.x + h, x.y), t) + u(Point2::new(x.x - h, x.y), t)
                + u(Point2::new(x.x, x.y + h), t)
                + u(Point2::new(x.x, x.y - h), t)
                - 4.0 * u(x, t))
                / (h * h);
            assert!((dtt - lap).abs() < 1e-4, "residual {}", (dtt - lap).abs());
        }
    }

    #[test]
    fn point_source_causal_and_stable() {
        let pulse = SourcePulse::default();
        let wave = IncidentWave::PointSources { sources: vec![Point2::new(3.0, 0.0)], pulse };
        let x = Point2::new(0.0, 0.0);
        // zero before the travel time
        assert_eq!(wave.eval(x, 2.9).unwrap(), 0.0);
        assert_eq!(wave.eval(x, 0.0).unwrap(), 0.0);
        // just after onset: stable under tolerance tightening
        let r = 3.0;
        let t = r + 1.2; // inside the active window
        let loose = source_term(r, t, &pulse);
        let tight = {
            let lo_cosh = ((t - pulse.center - pulse.halfwidth) / r).max(1.0);
            let hi_cosh = ((t - pulse.center + pulse.halfwidth) / r).min(t / r);
            quad::adaptive_gk(
                |theta| bump_profile((t - r * theta.cosh() - pulse.center) / pulse.halfwidth),
                lo_cosh.acosh(),
                hi_cosh.acosh(),
                1e-12,
            )
        };
        assert!(loose > 0.0);
        assert!((loose - tight).abs() < 1e-9, "{loose} vs {tight}");
        // source-point evaluation is rejected
        assert!(wave.eval(Point2::new(3.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn point_source_wake_decays() {
        let pulse = SourcePulse::default();
        let wave = IncidentWave::PointSources { sources: vec![Point2::new(0.0, 0.0)], pulse };
        let x = Point2::new(2.0, 0.0);
        // after the pulse has fully passed (t > r + c + w), the 2D wake decays
        let mut prev = f64::MAX;
        for t in [4.0, 5.0, 6.5, 8.0, 10.0] {
            let v = wave.eval(x, t).unwrap();
            assert!(v > 0.0 && v < prev, "t={t}: {v} !< {prev}");
            prev = v;
        }
    }

    #[test]
    fn boundary_trace_matches_pointwise_eval() {
        let wave = IncidentWave::reference_bump_plane();
        let curve = crate::geometry::kite_curve(48);
        let tab = radau_tableau(2).unwrap();
        let grid = build_grid(&tab, 0.25, 16).unwrap();
        let trace = wave.boundary_trace(&curve, &grid).unwrap();
        for (n, k, i) in [(0usize, 0usize, 3usize), (5, 1, 20), (16, 1, 47), (9, 0, 0)] {
            let t = grid.stage_time(n, k);
            let expect = wave.eval(curve.points()[i], t).unwrap();
            assert_eq!(trace.stage(n, k)[i], Complex64::new(expect, 0.0));
        }
        // t = 0: pulse supports sit at x.d in [4 +- 1/3] and [6 +- 1], the kite
        // within |x| <= 2.47, so the initial boundary samples vanish
        for i in 0..48 {
            assert_eq!(trace.stage(0, 0)[i].re, 0.0);
        }
        // zero-amplitude wave gives the zero sequence
        let zero = IncidentWave::BumpPlane {
            direction: Point2::new(1.0, 0.0),
            pulses: vec![PlanePulse { scale: 1.0, delay: -100.0, sign: 1.0 }],
        };
        let ztrace = zero.boundary_trace(&curve, &grid).unwrap();
        assert!(ztrace.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn causality_checks() {
        let curve = crate::geometry::kite_curve(64);
        let good = IncidentWave::reference_bump_plane();
        assert!(good.causality_check(&curve, 2.0).pass);
        // pulse centered on the obstacle at t = 0 must fail with a location
        let bad = IncidentWave::BumpPlane {
            direction: Point2::new(1.0, 0.0),
            pulses: vec![PlanePulse { scale: 1.0, delay: 0.0, sign: 1.0 }],
        };
        let report = bad.causality_check(&curve, 1.0);
        assert!(!report.pass);
        assert!(report.first_violation.is_some());
        // distant sources with support starting at t >= 1/2 pass
        let sources = IncidentWave::PointSources {
            sources: vec![Point2::new(6.0, 0.0), Point2::new(0.0, -7.0)],
            pulse: SourcePulse::default(),
        };
        assert!(sources.causality_check(&curve, 3.0).pass);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let wave = IncidentWave::BumpPlane { direction: Point2::new(1.0, 1.0), pulses: vec![] };
        assert!(wave.validate().is_err());
        let wave2 = IncidentWave::PointSources {
            sources: vec![Point2::new(1.0, 0.0)],
            pulse: SourcePulse { center: 0.2, halfwidth: 0.5 },
        };
        assert!(wave2.validate().is_err());
    }
}
