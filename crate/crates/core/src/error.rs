use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error("duplicate reading for meter {meter_id} at {timestamp}")]
    DuplicateReading { meter_id: String, timestamp: String },

    #[error("timestamp {timestamp} is not on the 15-minute grid")]
    Spacing { timestamp: String },

    #[error("series are not aligned: {0}")]
    Alignment(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("density grid too small: {mass_outside:.3e} of the mass lies outside [{lo}, {hi}]; suggested upper bound {suggested_hi}")]
    GridTooSmall {
        lo: f64,
        hi: f64,
        mass_outside: f64,
        suggested_hi: f64,
    },

    #[error("rank-deficient design matrix; degenerate direction: {0}")]
    RankDeficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
