use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("size {size} is outside (0, 1]")]
    InvalidSize { size: String },

    #[error("item {index}: {reason}")]
    InvalidItem { index: usize, reason: String },

    #[error("size {size} is not small (exceeds 1/{m})")]
    NotSmall { size: String, m: u32 },

    #[error("unsupported dimension {0} for builtin parameters (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("cannot parse number `{0}`")]
    ParseNumber(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unknown case {case} / subcase {subcase}")]
    UnknownCase { case: usize, subcase: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
