use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}:{line}: unknown activity label {value:?}")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("{path}:{line}: room {room:?} is not described by the home profile")]
    UnknownRoom {
        path: PathBuf,
        line: usize,
        room: String,
    },

    #[error("dataset {0} contains no events")]
    EmptyDataset(PathBuf),

    #[error("invalid session id {0:?}: only ASCII letters, digits, '.', '_' and '-' are allowed")]
    InvalidSessionId(String),

    #[error("no transition text for event kind {0:?}")]
    UnmappedEventKind(String),

    #[error("window size must be at least 1")]
    ZeroWindowSize,

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid home profile: {0}")]
    Profile(String),

    #[error("invalid generator config: {0}")]
    Synthetic(String),

    #[error("invalid backend config: {0}")]
    Backend(String),

    #[error("replay store has no response for prompt hash {0}")]
    ReplayMiss(String),

    #[error("run store: {0}")]
    RunStore(String),

    #[error("scoring: {0}")]
    Scoring(String),

    #[error("report: {0}")]
    Report(String),

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
