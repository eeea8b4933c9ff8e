//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset handling, model fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file; `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("unknown subject {0:?}")]
    UnknownSubject(String),

    #[error("infeasible protocol split: {0}")]
    InfeasibleSplit(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Design matrix carries no usable variance.
    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
