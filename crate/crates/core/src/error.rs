use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by the command-line front end to pick an exit
/// status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    ScorerProtocol,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Data => "data",
            ErrorCategory::ScorerProtocol => "scorer-protocol",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::ScorerProtocol => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema error in record {index}: {message}")]
    Schema { index: usize, message: String },

    #[error("malformed pre-tagged input at line {line}: {message}")]
    PreTagged { line: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("requested pool of {requested} sentences but only {available} are available")]
    PoolTooLarge { requested: usize, available: usize },

    #[error("text contains the reserved delimiter or is not a single segment: {0:?}")]
    Delimiter(String),

    #[error("concept set is empty")]
    EmptyConceptSet,

    #[error("scorer model features {found:?} do not match extracted features {expected:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("training pairs contain only one label")]
    SingleLabel,

    #[error("need at least two entries to draw negatives, got {0}")]
    NotEnoughEntries(usize),

    #[error("{what}: expected {expected} items, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error(
        "CIDEr needs a corpus of at least two instances to estimate document frequencies, got {0}"
    )]
    CorpusTooSmall(usize),

    #[error("unmatched concept-set keys: {}", .0.join(", "))]
    UnmatchedKeys(Vec<String>),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("scorer failed on sentence {sentence_id}: {message}")]
    Scorer { sentence_id: u64, message: String },

    #[error("scorer protocol: {0}")]
    Protocol(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Usage(_) | Error::FeatureMismatch { .. } => ErrorCategory::Config,
            Error::Scorer { .. } | Error::Protocol(_) => ErrorCategory::ScorerProtocol,
            _ => ErrorCategory::Data,
        }
    }
}
