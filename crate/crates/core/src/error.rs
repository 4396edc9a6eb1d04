use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("{path}: row {row}, column '{column}': {message}")]
    Ingestion {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error(
        "data quality undefined (within-class variance is zero): d_bet = {d_bet}, d_wit = {d_wit}"
    )]
    UndefinedQuality { d_bet: f64, d_wit: f64 },

    #[error("model file, line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::InvalidDimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
