use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied malformed arguments (dimension mismatch, empty input, bad config field).
    #[error("usage error: {0}")]
    Usage(String),

    /// Argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invariant density requested for parameters where it has infinite mass.
    #[error("invariant measure not normalizable for d = {d}, gamma = {gamma}: {requirement}")]
    NonNormalizable {
        d: usize,
        gamma: f64,
        requirement: &'static str,
    },

    #[error("unsupported dimension d = {0}")]
    UnsupportedDimension(usize),

    /// Implicit radial solve could not bracket a root.
    #[error("integrator failure at s = {s}, dW = {dw}: {reason}")]
    IntegratorFailure { s: f64, dw: f64, reason: String },

    /// Cartesian diffusion matrix evaluated at a coordinate singularity.
    #[error("coordinate singularity at t = {t}: radius {radius} below 1e-10")]
    CoordinateSingularity { t: f64, radius: f64 },

    /// Adaptive quadrature failed to reach tolerance; carries the partial estimate.
    #[error("quadrature did not converge: value {value}, error estimate {error_estimate}")]
    Quadrature { value: f64, error_estimate: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("moment of order {order} is infinite for this density")]
    InfiniteMoment { order: u32 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
