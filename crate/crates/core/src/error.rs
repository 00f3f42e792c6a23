use std::io;
use std::path::PathBuf;

use crate::fetch::FetchSummary;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("invalid clip id {id:?}: {reason}")]
    InvalidClipId { id: String, reason: &'static str },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("rule error: {0}")]
    Rule(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("media error: {0}")]
    Media(String),

    #[error("unknown clip {0:?}")]
    UnknownClip(String),

    #[error("clip {clip:?} has no field {field:?}")]
    UnknownField { clip: String, field: String },

    #[error("clip {clip:?} has no {field:?} asset")]
    AbsentField { clip: String, field: String },

    #[error("clip {clip:?}, field {field:?}: {source}")]
    Annotation {
        clip: String,
        field: String,
        #[source]
        source: Box<Error>,
    },

    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },

    #[error("checksum mismatch for {name}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        name: String,
        expected: String,
        actual: String,
    },

    #[error("archive error: {0}")]
    Archive(String),

    #[error("archive member escapes destination: {0}")]
    PathTraversal(String),

    #[error("unknown remote {0:?}")]
    UnknownRemote(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("remote {remote:?} failed: {source}")]
    Remote {
        remote: String,
        /// Outcomes of the remotes handled before the failure.
        completed: Box<FetchSummary>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// The innermost error, looking through clip/remote context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Annotation { source, .. } | Error::Remote { source, .. } => source.root(),
            other => other,
        }
    }
}
