use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// failing computation ran in.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("marginal is ill-defined: signalling violation {violation:e} exceeds tolerance")]
    Signalling { violation: f64 },

    #[error("conditioning on an event of probability {probability:e}")]
    Conditioning { probability: f64 },

    #[error("catalogue of {size} vertices exceeds the cap of {cap}")]
    Capacity { size: u128, cap: usize },

    #[error("linear program failed: {message} (residual {residual:e})")]
    Solver { message: String, residual: f64 },

    #[error("optimization did not converge: {message} (last value {last_value})")]
    Optimization { message: String, last_value: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
