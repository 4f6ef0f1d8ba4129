use thiserror::Error;

/// Errors surfaced by instance construction, solvers and oracles.
#[derive(Debug, Error)]
pub enum OtError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid pivot: {0}")]
    InvalidPivot(String),

    /// The warm-start basis is not contained in the working set. This is a
    /// hard error: succeeding the basis is what keeps restricted solves
    /// feasible, so it is never silently repaired.
    #[error("succession violation: {0}")]
    SuccessionViolation(String),

    #[error("oracle unsupported: {0}")]
    OracleUnsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two exact methods disagreed on the scaled objective.
    #[error("exactness violation: {0}")]
    ExactnessViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, OtError>;
