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

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: score is not finite")]
    NonFiniteScore { line: usize },

    #[error("ragged environment coverage: {0}")]
    RaggedCoverage(String),

    #[error("duplicate run {run} for cell {cell}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    DuplicateRun {
        cell: String,
        run: u64,
        line: Option<usize>,
    },

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("missing subsample for cell {0}")]
    MissingSubsample(String),

    #[error("invalid hyperparameter setting: {0}")]
    InvalidSetting(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
