//! Time-domain forward solver and time-discrete domain derivative.
//!
//! Composes the Laplace-domain boundary solver with the convolution
//! quadrature contour: the boundary trace of the incident wave is transformed
//! to the contour frequencies, one dense factorization of V(s) per
//! (node, stage eigenvalue) serves the forward solve and every Jacobian
//! direction, and receiver values come back through the inverse transform.
//! Frequencies are independent; results are assembled in fixed node order so
//! outputs are bit-identical for any worker count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ClosedCurve, PerturbationBasis, Point2};
use crate::helm2d::{assemble_v, AssemblyContext};
use crate::incident::IncidentWave;
use crate::rkcq::{self, CqGrid, StageSequence};

/// Obstacle, receivers, incident wave and final time.
#[derive(Clone, Debug)]
pub struct Scene {
    pub curve: ClosedCurve,
    pub receivers: Vec<Point2>,
    pub incident: IncidentWave,
    pub final_time: f64,
}

/// Margin for the pre-simulation causality validation.
const CAUSALITY_MARGIN: f64 = 2.0;

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.incident.validate()?;
        if self.receivers.is_empty() {
            return Err(Error::InvalidInput("scene needs at least one receiver".into()));
        }
        for z in &self.receivers {
            if self.curve.min_distance_to(*z) <= 0.0 {
                return Err(Error::InvalidInput(format!("receiver ({}, {}) touches the obstacle", z.x, z.y)));
            }
        }
        if self.final_time <= 0.0 {
            return Err(Error::InvalidInput(format!("final time {} must be positive", self.final_time)));
        }
        let report = self.incident.causality_check(&self.curve, CAUSALITY_MARGIN);
        if !report.pass {
            let (t, theta, magnitude) = report.first_violation.unwrap();
            return Err(Error::Causality { t, theta, magnitude });
        }
        Ok(())
    }
}

/// Receiver signals at the node times t_1..t_N with the time-discrete norm
/// ||g||^2 = tau sum_n sum_j g_{j,n}^2.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct TimeSignals {
    pub tau: f64,
    /// channels[j][n-1] = signal of receiver j at t_n
    pub channels: Vec<Vec<f64>>,
}

impl TimeSignals {
    pub fn receivers(&self) -> usize {
        self.channels.len()
    }

    pub fn steps(&self) -> usize {
        self.channels.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self.channels.iter().flat_map(|c| c.iter().map(|v| v * v)).sum();
        (self.tau * sq).sqrt()
    }

    pub fn sub(&self, other: &TimeSignals) -> Result<TimeSignals> {
        if self.receivers() != other.receivers() || self.steps() != other.steps() {
            return Err(Error::Incompatible(format!(
                "signal shapes ({}, {}) vs ({}, {})",
                self.receivers(),
                self.steps(),
                other.receivers(),
                other.steps()
            )));
        }
        let channels = self
            .channels
            .iter()
            .zip(other.channels.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x - y).collect())
            .collect();
        Ok(TimeSignals { tau: self.tau, channels })
    }

    pub fn scale(&self, factor: f64) -> TimeSignals {
        TimeSignals {
            tau: self.tau,
            channels: self.channels.iter().map(|c| c.iter().map(|v| v * factor).collect()).collect(),
        }
    }
}

/// Per-contour-node output of the frequency sweep.
struct NodeOutput {
    /// forward receiver values, stage-major: [stage][target]
    forward: Vec<Complex64>,
    /// one block per direction, same layout
    columns: Vec<Vec<Complex64>>,
}

/// The frequency sweep shared by the forward map, the Jacobian and the
/// snapshot evaluation: per node and stage eigenvalue, assemble + factorize
/// V(s) once, then solve for the forward density and all direction densities.
fn frequency_sweep(
    curve: &ClosedCurve,
    incident: &IncidentWave,
    targets: &[Point2],
    basis: Option<&PerturbationBasis>,
    grid: &CqGrid,
) -> Result<(StageSequence, Vec<StageSequence>)> {
    let ctx = AssemblyContext::new(curve)?;
    for z in targets {
        ctx.check_target(*z)?;
    }
    let trace = incident.boundary_trace(curve, grid)?;
    let ghat = rkcq::forward_transform(grid, &trace);
    let n_s = curve.samples();
    let m = grid.stages();
    let nt = targets.len();
    let len = grid.len();
    let half = len / 2;
    let dirs = basis.map(|b| b.count()).unwrap_or(0);

    // independent frequency nodes; the boundary trace is real, so node
    // len - l is the conjugate of node l
    let outputs: Vec<Result<NodeOutput>> = (0..=half)
        .into_par_iter()
        .map(|l| {
            let node = &grid.nodes[l];
            let gh = &ghat[l * m * n_s..(l + 1) * m * n_s];
            let mut forward = vec![Complex64::new(0.0, 0.0); m * nt];
            let mut columns = vec![vec![Complex64::new(0.0, 0.0); m * nt]; dirs];
            // eigen-stage receiver values, then transform back by Q
            for k in 0..m {
                let s = node.eigenvalues[k];
                let w = assemble_v(s, &ctx)?;
                // stage transform of the trace: w_k = sum_l Qinv[k,l] ghat[l]
                let mut rhs = vec![Complex64::new(0.0, 0.0); n_s];
                for stage in 0..m {
                    let coef = node.q_inv[k * m + stage];
                    for i in 0..n_s {
                        rhs[i] += coef * gh[stage * n_s + i];
                    }
                }
                let mu = w.solve_dirichlet(&rhs)?;
                // receiver kernel matrix for this frequency
                let kernel: Vec<Complex64> = targets
                    .iter()
                    .flat_map(|&z| {
                        ctx.points().iter().map(move |p| crate::specfun::k0(s * p.dist(z)) / n_s as f64)
                    })
                    .collect();
                let eval = |density: &[Complex64], out: &mut [Complex64], sign: f64, q_col: usize| {
                    for (r, row) in kernel.chunks(n_s).enumerate() {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for i in 0..n_s {
                            acc += row[i] * density[i];
                        }
                        for stage in 0..m {
                            out[stage * nt + r] += node.q[stage * m + q_col] * acc * sign;
                        }
                    }
                };
                eval(&mu, &mut forward, -1.0, k);
                if let Some(basis) = basis {
                    // all direction right-hand sides through one factorization
                    let mut rhs_block = vec![Complex64::new(0.0, 0.0); n_s * dirs];
                    for (j, hnu) in basis.hnu.iter().enumerate() {
                        let dst = &mut rhs_block[j * n_s..(j + 1) * n_s];
                        for i in 0..n_s {
                            dst[i] = -hnu[i] * mu[i] / ctx.speeds()[i];
                        }
                    }
                    w.solve_many(&mut rhs_block, dirs);
                    for j in 0..dirs {
                        eval(&rhs_block[j * n_s..(j + 1) * n_s], &mut columns[j], 1.0, k);
                    }
                }
            }
            Ok(NodeOutput { forward, columns })
        })
        .collect();

    // assemble the frequency arrays in fixed order
    let mut freq_forward = vec![Complex64::new(0.0, 0.0); len * m * nt];
    let mut freq_columns = vec![vec![Complex64::new(0.0, 0.0); len * m * nt]; dirs];
    for (l, out) in outputs.into_iter().enumerate() {
        let out = out?;
        let dst = &mut freq_forward[l * m * nt..(l + 1) * m * nt];
        dst.copy_from_slice(&out.forward);
        if l != 0 && 2 * l != len {
            let mirror = len - l;
            for (e, v) in out.forward.iter().enumerate() {
                freq_forward[mirror * m * nt + e] = v.conj();
            }
        }
        for (j, col) in out.columns.iter().enumerate() {
            let dst = &mut freq_columns[j][l * m * nt..(l + 1) * m * nt];
            dst.copy_from_slice(col);
            if l != 0 && 2 * l != len {
                let mirror = len - l;
                for (e, v) in col.iter().enumerate() {
                    freq_columns[j][mirror * m * nt + e] = v.conj();
                }
            }
        }
    }
    let forward = rkcq::inverse_transform(grid, &freq_forward, m, nt);
    let columns = freq_columns.into_iter().map(|fc| rkcq::inverse_transform(grid, &fc, m, nt)).collect();
    Ok((forward, columns))
}

fn stage_to_signals(grid: &CqGrid, seq: &StageSequence) -> TimeSignals {
    let nodes = rkcq::extract_nodes(seq);
    let nt = seq.dim;
    let channels = (0..nt)
        .map(|r| (1..=seq.steps).map(|n| nodes[n][r].re).collect())
        .collect();
    TimeSignals { tau: grid.tau, channels }
}

/// Solves the forward problem: receiver signals of the scattered wave.
pub fn forward(scene: &Scene, grid: &CqGrid) -> Result<TimeSignals> {
    scene.validate()?;
    check_grid(scene, grid)?;
    let (fwd, _) = frequency_sweep(&scene.curve, &scene.incident, &scene.receivers, None, grid)?;
    Ok(stage_to_signals(grid, &fwd))
}

/// Forward signals plus the time-discrete domain derivative for every
/// direction in the basis. One factorization per frequency serves everything.
pub fn jacobian(scene: &Scene, basis: &PerturbationBasis, grid: &CqGrid) -> Result<(TimeSignals, Vec<TimeSignals>)> {
    scene.validate()?;
    check_grid(scene, grid)?;
    let (fwd, cols) = frequency_sweep(&scene.curve, &scene.incident, &scene.receivers, Some(basis), grid)?;
    Ok((stage_to_signals(grid, &fwd), cols.iter().map(|c| stage_to_signals(grid, c)).collect()))
}

/// Scattered (or total) field values at probe points for a subset of node
/// times; probes must respect the near-boundary exclusion zone.
pub fn field_snapshots(
    scene: &Scene,
    probes: &[Point2],
    node_times: &[usize],
    total_field: bool,
    grid: &CqGrid,
) -> Result<Vec<Vec<f64>>> {
    scene.validate()?;
    check_grid(scene, grid)?;
    for &n in node_times {
        if n > grid.steps {
            return Err(Error::InvalidInput(format!("snapshot node {n} beyond the last step {}", grid.steps)));
        }
    }
    let (fwd, _) = frequency_sweep(&scene.curve, &scene.incident, probes, None, grid)?;
    let nodes = rkcq::extract_nodes(&fwd);
    let mut out = Vec::with_capacity(node_times.len());
    for &n in node_times {
        let t = n as f64 * grid.tau;
        let mut frame = Vec::with_capacity(probes.len());
        for (i, &p) in probes.iter().enumerate() {
            let mut v = nodes[n][i].re;
            if total_field {
                v += scene.incident.eval(p, t)?;
            }
            frame.push(v);
        }
        out.push(frame);
    }
    Ok(out)
}

fn check_grid(scene: &Scene, grid: &CqGrid) -> Result<()> {
    let t_grid = grid.final_time();
    if (t_grid - scene.final_time).abs() > 1e-9 * scene.final_time.max(1.0) {
        return Err(Error::Incompatible(format!(
            "grid covers T = {t_grid} but the scene requests T = {}",
            scene.final_time
        )));
    }
    Ok(())
}
