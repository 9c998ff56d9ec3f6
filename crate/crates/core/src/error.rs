use thiserror::Error;

use crate::network::NotLayered;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The input text does not follow the network description schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A structural invariant of the network or of an argument is violated.
    #[error("validation error in `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// Exhaustive enumeration refused because the instance is too large.
    #[error("capacity exceeded: {what} needs {required}, limit is {limit}")]
    Capacity { what: String, required: u128, limit: u128 },

    #[error(transparent)]
    NotLayered(Box<NotLayered>),

    #[error("matrix is not strictly positive definite (pivot {pivot:e} at index {index})")]
    SingularMatrix { index: usize, pivot: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("relay {relay}: amplification {alpha:e} exceeds the power limit {limit:e}")]
    PowerViolation { relay: String, alpha: f64, limit: f64 },

    #[error("layer {layer}: description rate {description:.6} exceeds next-hop capacity {capacity:.6}")]
    InfeasibleDistortion { layer: usize, description: f64, capacity: f64 },

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }
}

impl From<NotLayered> for Error {
    fn from(e: NotLayered) -> Self {
        Error::NotLayered(Box::new(e))
    }
}
