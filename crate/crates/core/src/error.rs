use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Format {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("training diverged at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("stale artifact: {0}")]
    Stale(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Usage and validation problems, as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Shape { .. } | Error::Stale(_)
        )
    }
}
