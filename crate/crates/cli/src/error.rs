use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use msvc_core::transport::{CodecError, TransportError};
use msvc_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Core(#[from] Error),
    #[error("cheating detected: {0}")]
    Rejected(String),
    #[error("transport failure: {0}")]
    Transport(TransportError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: CodecError,
    },
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 2 rejected, 3 transport, 4 configuration or input, 1 anything else.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Rejected(_) => 2,
            CliError::Transport(_) => 3,
            CliError::Config(_) | CliError::Core(_) | CliError::Decode { .. } => 4,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        })
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Core(e) => CliError::Core(e),
            other => CliError::Transport(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
