use thiserror::Error;

use crate::grid::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed instance: {0}")]
    MalformedInstance(String),

    #[error("agent {agent}: no path from {start} to {goal}")]
    PathNotFound {
        agent: usize,
        start: Cell,
        goal: Cell,
    },

    /// Repair could not find a collision-free timing; the input is not a
    /// well-formed infrastructure.
    #[error("agent {agent}: {reason} (instance is not well-formed)")]
    NotWellFormed { agent: usize, reason: String },

    #[error("could not generate a well-formed instance with {n} agents on {map} after {attempts} attempts")]
    GenerationFailed {
        n: usize,
        map: String,
        attempts: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
