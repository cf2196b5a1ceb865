use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty series")]
    EmptySeries,

    #[error("timestamps are not sorted (record {index}: {prev} > {next})")]
    UnsortedInput { index: usize, prev: i64, next: i64 },

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("degenerate return distribution: {0}")]
    DegenerateDistribution(String),

    #[error("degenerate index values: {0}")]
    DegenerateIndex(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("symbol mismatch: {0}")]
    SymbolMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unreachable backward state (i={i}, u={u}, v={v}): survival is zero")]
    UnreachableBackwardState { i: usize, u: usize, v: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
