use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("batch size {b} does not divide n = {n}")]
    BatchDivisibility { n: usize, b: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite iterate in epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("inner iterates were not recorded for this epoch")]
    MissingTrace,

    #[error("point is not stationary: gradient norm {grad_norm:e} exceeds tolerance {tol:e}")]
    NotStationary { grad_norm: f64, tol: f64 },

    #[error("step size undefined: {0}")]
    UndefinedStep(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
