use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} has norm {norm} > 1; features must be projected to the unit ball")]
    NotNormalized { row: usize, norm: f64 },

    #[error("{path}: parse error at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "cannot reach eps={target} with sigma in [{sigma_low}, {sigma_high}]: \
         eps ranges over [{eps_at_high}, {eps_at_low}]"
    )]
    Calibration {
        target: f64,
        sigma_low: f64,
        sigma_high: f64,
        eps_at_low: f64,
        eps_at_high: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("NaN encountered in {0}")]
    NaN(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
