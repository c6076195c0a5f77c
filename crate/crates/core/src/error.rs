use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("integer overflow computing {0}")]
    Overflow(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quantization failed: {0}")]
    Quantization(String),

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("user {user} failed to reconstruct file {file}")]
    DecodeFailure { user: usize, file: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

pub type Result<T> = std::result::Result<T, Error>;
