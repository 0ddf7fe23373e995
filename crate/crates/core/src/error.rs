use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("index {index} out of range for {len} entries")]
    InvalidIndex { index: usize, len: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {msg}")]
    Schema { path: PathBuf, msg: String },

    #[error("degenerate normalization stats: pupil_min={min} pupil_max={max}")]
    DegenerateStats { min: f64, max: f64 },

    #[error("cannot split dataset: {0}")]
    CannotSplit(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("class {class} has {count} training sample(s); at least 2 are required")]
    SparseClass { class: usize, count: usize },

    #[error("non-finite loss at epoch {epoch}, step {step}{}", .checkpoint.as_ref().map(|p| format!(" (diagnostic checkpoint: {})", p.display())).unwrap_or_default())]
    NonFinite {
        epoch: usize,
        step: usize,
        checkpoint: Option<PathBuf>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
