use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset handling, scoring, selection and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in view `{view}` at row {row}, column {column}")]
    NonFinite {
        view: String,
        row: usize,
        column: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible selection: k = {k} with {available} features available")]
    InfeasibleK { k: usize, available: usize },

    #[error("invalid feature id (view {view}, column {column})")]
    InvalidFeature { view: usize, column: usize },

    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("{path}: row {row}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("every label is degenerate (all-positive or all-negative)")]
    AllLabelsDegenerate,

    #[error("no valid samples for {0}")]
    NoValidSamples(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report: {0}")]
    Report(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
