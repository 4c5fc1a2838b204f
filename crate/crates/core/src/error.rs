use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FactError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FactError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("non-numeric value {value:?} in column {column:?} (row {row})")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("column {0:?} not found")]
    UnknownColumn(String),
    #[error("manifest references unknown column {0:?}")]
    ManifestColumn(String),
    #[error("split would leave the {0} partition empty")]
    EmptySplit(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value {value} for feature {feature} is outside [0, {max}]")]
    OutOfRange { feature: usize, value: f64, max: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("no unknown features remain")]
    NoUnknownFeatures,
    #[error("feature unit {0} is already known")]
    AlreadyKnown(usize),
    #[error("unknown feature unit {0}")]
    UnknownUnit(usize),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl FactError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FactError::Io {
            path: path.into(),
            source,
        }
    }
}
