use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] drcr_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("row {row} (line {line}): column `{column}` is {value}, which has no logarithm")]
    NonPositive {
        row: usize,
        line: u64,
        column: String,
        value: f64,
    },
    #[error("model file: {0}")]
    Model(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Process exit code: 2 bad arguments, 3 solver failure, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(drcr_core::Error::InvalidArgument(_)) => 2,
            Error::Core(_) => 3,
            Error::Io { .. } | Error::Parse { .. } | Error::NonPositive { .. } | Error::Model(_) => 4,
            Error::Config(_) | Error::Invalid(_) => 2,
        }
    }
}
