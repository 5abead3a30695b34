use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset parse error: {0}")]
    Parse(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pattern set was computed from a different dataset")]
    PatternMismatch,

    #[error("empty pattern set")]
    EmptyPatterns,

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("LP subroutine failed: {0}")]
    Lp(String),

    #[error("solution is not optimal (status {0})")]
    NotOptimal(String),

    #[error("oracle dictionary infeasible: {0}")]
    DictionaryInfeasible(String),

    #[error("decomposition check failed: {0}")]
    Decomposition(String),

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Diverged { epoch: u64, loss: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
