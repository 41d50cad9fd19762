use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Stable for automation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Validation = 1,
    Dependency = 2,
    Transport = 3,
    Data = 4,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` needs {artifact}; run stage `{producer}` first")]
    Dependency { stage: &'static str, artifact: String, producer: &'static str },
    #[error("{endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Config(_) => ExitCode::Validation,
            Error::Dependency { .. } => ExitCode::Dependency,
            Error::Transport { .. } => ExitCode::Transport,
            Error::Parse { .. } | Error::Data(_) | Error::Io { .. } => ExitCode::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
