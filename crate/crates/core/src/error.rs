use thiserror::Error;

/// Errors produced by the simulator and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Too few check bits to estimate the error rate.
    #[error("insufficient sample: {available} check bits available, {required} required")]
    AbortInsufficientSample { available: usize, required: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
