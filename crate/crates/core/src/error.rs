use thiserror::Error;

use crate::data::IdxError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid bounds: lo {lo} > hi {hi}")]
    InvalidBounds { lo: i32, hi: i32 },

    #[error("pixel intensity {value} at index {index} outside [0, 1]")]
    Pixel { index: usize, value: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
