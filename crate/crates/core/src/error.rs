use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),

    #[error("label {label} out of range for a group of order {order}")]
    LabelOutOfRange { label: u64, order: u64 },

    #[error("oracle model violation: {0}")]
    ModelViolation(String),

    #[error("no element outside the given set")]
    NoElement,

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A Monte Carlo subroutine exhausted its sampling budget. Retrying with a
    /// fresh random stream is expected to succeed.
    #[error("randomized subroutine failed: {0}")]
    RandomizedFailure(String),

    #[error("oracle access budget of {0} exceeded")]
    BudgetExceeded(u64),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures that may disappear on a rerun with fresh randomness.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::RandomizedFailure(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
