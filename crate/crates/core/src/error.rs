use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A record in a line-oriented file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate uid {uid:?} on lines {first} and {second}")]
    DuplicateUid {
        uid: String,
        first: usize,
        second: usize,
    },

    #[error("missing uids: {}", .0.join(", "))]
    MissingUids(Vec<String>),

    #[error("unknown uid {0:?}")]
    UnknownUid(String),

    #[error("dimension mismatch for {uid:?}: expected {expected}, found {found}")]
    DimensionMismatch {
        uid: String,
        expected: usize,
        found: usize,
    },

    #[error("zero vector for {0:?}")]
    ZeroVector(String),

    #[error("feature configuration mismatch: {0}")]
    FeatureMismatch(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
