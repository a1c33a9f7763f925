use thiserror::Error;

/// Error type shared across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument outside the right half-plane: z = {0}")]
    HalfPlane(num_complex::Complex64),

    #[error("singular or ill-conditioned system in {context} (condition estimate {cond:.3e})")]
    Singular { context: &'static str, cond: f64 },

    #[error("target at distance {dist:.3e} from the boundary; minimum admissible is {min_dist:.3e}")]
    TargetTooClose { dist: f64, min_dist: f64 },

    #[error("incident wave violates causality: |u^i| = {magnitude:.3e} at t = {t:.6}, boundary parameter {theta:.6}")]
    Causality { t: f64, theta: f64, magnitude: f64 },

    #[error("differentiation symbol at frequency node {node} is numerically defective (residual {residual:.3e})")]
    DefectiveSymbol { node: usize, residual: f64 },

    #[error("frequency evaluator failed at s = {s}: {source}")]
    AtFrequency {
        s: num_complex::Complex64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Incompatible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
