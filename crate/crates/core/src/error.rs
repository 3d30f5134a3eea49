use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside the domain of the operation (e.g. a p-value of 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or configuration parameter violates its invariants.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// K is too large for direct factorial arithmetic.
    #[error("K = {k} exceeds the supported maximum of {max}")]
    Overflow { k: usize, max: usize },

    /// The upper bisection bound kept failing to bring the error rate down to alpha.
    #[error(
        "no bracket for coordinate {gamma}: error rate {rate} still exceeds alpha {alpha} at mu = {upper}"
    )]
    Bracket {
        gamma: usize,
        upper: f64,
        rate: f64,
        alpha: f64,
    },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
