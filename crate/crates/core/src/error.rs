use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between reading a matrix and writing an embedding.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input matrix is empty")]
    EmptyMatrix,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least 4 points, got {n}")]
    TooFewPoints { n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("data has zero total variance")]
    DegenerateData,

    #[error("{what} is limited to n <= {cap}, got n = {n}")]
    TooLarge { what: &'static str, n: usize, cap: usize },

    #[error("non-finite coordinate produced at iteration {iteration}")]
    NonFiniteUpdate { iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },

    #[error("row count mismatch: {left} vs {right}")]
    RowCountMismatch { left: usize, right: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Stable short name, used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyMatrix => "empty_matrix",
            Error::NonFinite { .. } => "non_finite",
            Error::TooFewPoints { .. } => "too_few_points",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateData => "degenerate_data",
            Error::TooLarge { .. } => "too_large",
            Error::NonFiniteUpdate { .. } => "non_finite_update",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse_error",
            Error::RaggedRows { .. } => "ragged_rows",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::Manifest(_) => "manifest",
            Error::Io { .. } => "io_error",
        }
    }
}
