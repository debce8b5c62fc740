//! Command-line front end and experiment harness for `mvsc-core`.

pub mod bench;
pub mod cli;
pub mod error;
pub mod eval;
pub mod harness;
pub mod prepare;
pub mod settings;

pub use cli::run_cli;
pub use error::{CliError, Result};
pub use harness::{cmd_run, Aggregate, ExperimentSpec, Input, RunRecord, RunStatus};
