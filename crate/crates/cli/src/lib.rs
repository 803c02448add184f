//! Command-line companion to `lddmd-core`: run configuration, CSV
//! ingestion/export, the versioned checkpoint format and the four
//! subcommands (`generate`, `train`, `eval`, `inspect`).

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{CliError, ExitCode};
