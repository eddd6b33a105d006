use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("Ellis stress solve did not converge for shear rate {shear_rate} after {iterations} iterations")]
    NoConvergence { shear_rate: f64, iterations: usize },

    #[error("length mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("film height must be strictly positive, found {value} at node {index}")]
    NonPositiveHeight { index: usize, value: f64 },

    #[error("film height must be non-negative, found {value} at node {index}")]
    NegativeHeight { index: usize, value: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("banded matrix is singular (zero pivot in column {column})")]
    Singular { column: usize },

    #[error("states live on different grids ({left} vs {right} nodes)")]
    GridMismatch { left: usize, right: usize },

    #[error("time step failed at t = {time}: no Picard convergence down to dt = {dt}")]
    StepFailure { time: f64, dt: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Domain {
        name,
        reason: reason.into(),
    }
}
