use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mvsc_core::Error),

    /// Some runs of a campaign timed out or failed; everything that finished
    /// is on disk.
    #[error("{failed} of {total} runs did not complete ({first}); partial results in {}", dir.display())]
    Incomplete {
        failed: usize,
        total: usize,
        first: String,
        code: i32,
        dir: PathBuf,
    },
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => core_exit_code(e),
            CliError::Incomplete { code, .. } => *code,
        }
    }
}

/// Exit code for a library error. Dimension errors come from settings that do
/// not fit the data (f larger than a view, too few kernel components), so
/// they count as configuration errors.
pub fn core_exit_code(e: &mvsc_core::Error) -> i32 {
    use mvsc_core::Error as E;
    match e.root() {
        E::Data(_) | E::Graph(_) => EXIT_DATA,
        E::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
