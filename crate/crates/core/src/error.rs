use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid of {n} points cannot resolve {m} modes (need n >= {need})")]
    GridTooSmall { n: usize, m: usize, need: usize },

    #[error("mode count mismatch: {0} vs {1}")]
    ModeMismatch(usize, usize),

    /// A constraint on the model was violated; `condition` names it.
    #[error("{condition}: {message}")]
    Condition {
        condition: &'static str,
        message: String,
    },

    #[error("path blew up at t = {time} (|coefficient| > 1e12 or non-finite)")]
    BlowUp { time: f64 },

    #[error("study aborted: {flagged} of {total} paths flagged at {label}")]
    StudyAborted {
        label: String,
        flagged: usize,
        total: usize,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn condition(condition: &'static str, message: impl Into<String>) -> Self {
        Error::Condition {
            condition,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
