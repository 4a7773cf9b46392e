//! Crate-wide error type. Variants mirror the failure classes surfaced by
//! the public operations; soft conditions (window-exit truncation,
//! approximation-only distances) are flags on results, not errors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("not differentiable at the requested point: {0}")]
    NotDifferentiable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
