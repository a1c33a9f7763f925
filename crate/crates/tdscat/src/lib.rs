//! Time-domain sound-soft acoustic scattering in 2D.
//!
//! The forward problem is solved by Runge-Kutta convolution quadrature over
//! Laplace-domain boundary integral equations (single-layer formulation);
//! the Jacobian of the receiver measurements with respect to star-shaped
//! boundary parameters comes from the same machinery as a discrete
//! convolution operator, and a damped Gauss-Newton loop reconstructs the
//! obstacle from time-domain point measurements.

pub mod error;
pub mod geometry;
pub mod helm2d;
pub mod incident;
pub mod inverse;
mod linalg;
mod quad;
pub mod rkcq;
pub mod specfun;
pub mod timedomain;

pub use error::{Error, Result};
