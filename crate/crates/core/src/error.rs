use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the command-line front end to pick an exit
/// code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("unknown label {label:?} at line {line} (expected 0 or 1)")]
    UnknownLabel { line: usize, label: String },

    #[error("line {line}: exactly one statement of a pair must be sarcastic")]
    BothOrNeitherSarcastic { line: usize },

    #[error("no augmentation pool item shares a hashtag with the target dataset")]
    EmptyOverlap,

    #[error("augmentation pool is empty")]
    EmptyPool,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),

    #[error("non-finite gradient in parameter {0:?}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("split {0:?} is empty")]
    EmptySplit(&'static str),

    #[error("language-model corpus has no sentence with at least two tokens")]
    EmptyCorpus,

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint entry {name:?}: manifest shape {found:?} does not match expected {expected:?}")]
    ShapeManifestMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Usage,
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
