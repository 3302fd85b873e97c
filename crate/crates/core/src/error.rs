use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A simulated state stopped being finite; carries the offending step.
    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    /// A batch operation was handed no samples.
    #[error("empty batch")]
    EmptyBatch,

    /// Two paths or measures do not share a time grid / dimension.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A numeric argument is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    SolverDiverged(String),

    /// The exact transport solver refuses instances above its size cap.
    #[error("sample count {n} exceeds solver cap {cap}; use the batched estimator")]
    CapExceeded { n: usize, cap: usize },

    /// Configuration file or override could not be parsed / validated.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
