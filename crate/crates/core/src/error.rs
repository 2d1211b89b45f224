use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum CrlError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header lacks required column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: target value {value:?} is missing or not in {{0,1}}")]
    BadTarget { row: usize, value: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("column `{column}`: unknown category {label:?}")]
    UnknownCategory { column: String, label: String },

    #[error("column `{0}` has no observed training values")]
    AllMissingColumn(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: one side is constant or fewer than 2 complete pairs")]
    DegenerateCorrelation,

    #[error("distribution is degenerate (zero variance or too few values)")]
    DegenerateDistribution,

    #[error("target class {0} is absent")]
    EmptyClass(u8),

    #[error("labels must be 0 or 1")]
    NonBinaryLabels,

    #[error("training diverged: loss became non-finite at epoch {0}")]
    DivergenceDetected(usize),

    #[error("node has no samples")]
    EmptyNode,

    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("only one class present")]
    OneClassOnly,

    #[error("y_true has zero variance")]
    ZeroVariance,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

impl CrlError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CrlError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for I/O failures, 2 for everything
    /// that indicates bad input data, schema or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CrlError::Io { .. } => 1,
            CrlError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CrlError>;
