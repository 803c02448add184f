//! Error type shared by all subcommands, with the stable exit-code
//! contract: 0 success, 2 input/config error, 3 numerical abort.

use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    InputError = 2,
    NumericalAbort = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, data, checkpoint or filesystem state.
    #[error("{0}")]
    Input(String),
    /// Training hit non-finite numbers; the message names the last-good
    /// checkpoint if one was written.
    #[error("{0}")]
    Abort(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::InputError,
            CliError::Abort(_) => ExitCode::NumericalAbort,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// Wraps an I/O error with the path it concerns.
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

impl From<lddmd_core::Error> for CliError {
    fn from(e: lddmd_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
