use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image too small for Laplacian: {width}x{height} (need at least 3x3)")]
    ImageTooSmall { width: usize, height: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty mask")]
    EmptyMask,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("all search trials diverged: {0}")]
    AllTrialsDiverged(String),

    #[error("{}:{line}: {msg}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("pgm: {0}")]
    Pgm(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
