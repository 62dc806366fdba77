use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// An input violated a dimensional or range contract.
    #[error("validation error: {0}")]
    Validation(String),

    /// A persisted artifact (dataset, projection, checkpoint) could not be parsed.
    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("environment protocol error: {0}")]
    Protocol(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Artifact {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) => 2,
            Error::Artifact { .. } | Error::Io { .. } | Error::Stream(_) | Error::Protocol(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

/// Fails with [`Error::Numerical`] when `value` is NaN or infinite.
pub(crate) fn ensure_finite(what: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!("{what} is not finite ({value})")))
    }
}
