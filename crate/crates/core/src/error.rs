use thiserror::Error;

/// Errors raised by the allocation library.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// failing computation was instantiated with.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible distortion target {d0:e}: must exceed the distortion floor {floor:e}")]
    Infeasible { d0: f64, floor: f64 },

    #[error("no estimator: every amplifier gain is zero")]
    NoEstimator,

    #[error("threshold crossing is not unique: f(M) < 1 resumes after a crossing at M = {crossings:?}")]
    NonUniqueThreshold { crossings: Vec<usize> },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
