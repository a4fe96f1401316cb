use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("header does not match schema: {0}")]
    SchemaMismatch(String),
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("nominal column `{column}` exceeds max cardinality {max}")]
    Cardinality { column: String, max: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid filter plan: {0}")]
    InvalidPlan(String),
    #[error("filter step {step} would remove target column `{column}`")]
    PlanRemovesTarget { step: usize, column: String },
    #[error("filter plan leaves no feature columns")]
    EmptyResult,
    #[error("table must have exactly one target column, found {0}")]
    TargetCount(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("no observed values: {0}")]
    EmptyObserved(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("missing values in `{0}` where complete data is required")]
    MissingValues(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("feature universe mismatch between rankings: {0}")]
    UniverseMismatch(String),
    #[error("tree node {node} has no usable cover count")]
    MissingCover { node: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("artifact {path} was produced by config {found}, expected {expected}")]
    StaleArtifact {
        path: PathBuf,
        found: String,
        expected: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
