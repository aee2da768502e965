use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the mechanism, its file formats and the audits.
#[derive(Debug, Error)]
pub enum DprpError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("frame {path} is {found_w}x{found_h}x{found_c}, expected {expected_w}x{expected_h}x{expected_c}")]
    InconsistentFrameSize {
        path: PathBuf,
        expected_w: u32,
        expected_h: u32,
        expected_c: u32,
        found_w: u32,
        found_h: u32,
        found_c: u32,
    },

    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannelCount(u32),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("dataset contains no loadable videos")]
    EmptyDataset,

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DprpError> = std::result::Result<T, E>;
