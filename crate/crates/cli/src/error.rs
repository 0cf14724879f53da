use std::io;
use std::path::Path;

use thiserror::Error;

/// A command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("{0}")]
    Missing(String),
    /// Exit code 3.
    #[error("{0}")]
    Malformed(String),
    /// Exit code 4.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Missing(_) => 2,
            CliError::Malformed(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    /// Classifies a library error raised while handling `what`.
    pub fn from_lib(what: &str, e: panoptic::Error) -> Self {
        match e {
            panoptic::Error::Io(io) => Self::from_io(what, io),
            panoptic::Error::EmptyInstance => CliError::Internal(format!("{what}: {e}")),
            e => CliError::Malformed(format!("{what}: {e}")),
        }
    }

    pub fn from_io(what: &str, e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::NotFound => CliError::Missing(format!("{what}: {e}")),
            io::ErrorKind::UnexpectedEof | io::ErrorKind::InvalidData => CliError::Malformed(format!("{what}: {e}")),
            _ => CliError::Internal(format!("{what}: {e}")),
        }
    }

    pub fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Internal(format!("writing {}: {e}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
