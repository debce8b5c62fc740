use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading or validating a dataset on disk.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: file not found")]
    MissingFile { path: PathBuf },

    #[error("{path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed header: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    #[error("{path}:{line}: malformed record: {detail}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{path}: index {index} out of range for n = {n}")]
    IndexOutOfRange { path: PathBuf, index: usize, n: usize },

    #[error("{path}: size mismatch: expected {expected} nodes, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile { path }
        } else {
            DataError::Io { path, source }
        }
    }
}

/// Violations of the sparse graph invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("edge ({row}, {col}) has index out of range for n = {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("duplicate edge ({row}, {col})")]
    Duplicate { row: usize, col: usize },

    #[error("edge ({row}, {col}) has invalid weight {weight}")]
    BadWeight { row: usize, col: usize, weight: f64 },

    #[error("graph flagged symmetric but edge ({row}, {col}) has no matching reverse edge")]
    NotSymmetric { row: usize, col: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("view {view}: {source}")]
    View {
        view: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn in_view(self, view: usize) -> Self {
        Error::View {
            view,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping view-context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::View { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
