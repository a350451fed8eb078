use std::path::PathBuf;

use rssi_cell_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Usage = 2,
    Data = 3,
    Internal = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data { path: path.into(), message: message.into() }
    }

    pub fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Usage(_) | Error::Config { .. } => ExitCode::Usage,
            Error::Data { .. } | Error::Io { .. } => ExitCode::Data,
            Error::Internal(_) => ExitCode::Internal,
            Error::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::InvalidSplit(_)
                | CoreError::MissingSet(_)
                | CoreError::UnknownNode(_)
                | CoreError::EmptyMask
                | CoreError::MaskOutOfRange { .. }
                | CoreError::TooManyNodes { .. }
                | CoreError::NonPositive { .. } => ExitCode::Usage,
                CoreError::ImpossibleObservation { .. } | CoreError::InvalidModel(_) => ExitCode::Internal,
                _ => ExitCode::Data,
            },
        }
    }
}
