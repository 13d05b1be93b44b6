use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range. `key` names the offending field.
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("parameter layouts differ: {0}")]
    LayoutMismatch(String),

    #[error("cannot average an empty parameter list")]
    EmptyParams,

    #[error("population is extinct (N = {0}); the episode must end first")]
    ExtinctPopulation(f64),

    #[error("environment contract violated: {0}")]
    Contract(String),

    #[error("empty rollout")]
    EmptyRollout,

    #[error("batch of {actual} transitions is below the minimum of {minimum}")]
    BatchTooSmall { minimum: usize, actual: usize },

    #[error("cannot select {k} clients out of {n}")]
    Selection { n: usize, k: usize },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("metrics: {0}")]
    Metrics(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Parse(_) | Error::Selection { .. })
    }
}
