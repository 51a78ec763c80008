use thiserror::Error;

/// Unified error type for layout, operator, and experiment failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain tag mismatch: expected {expected} field, got {got}")]
    DomainTag { expected: &'static str, got: &'static str },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no valid partition for tuple {0:?}")]
    NoValidPartition(Vec<u32>),

    #[error("finite-difference step underflow at h = {0:e}")]
    StepUnderflow(f64),

    #[error("power iteration did not converge in {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
