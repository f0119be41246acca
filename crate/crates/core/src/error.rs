//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input document. `line` is 1-based; 0 when the failure is not tied to a line.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A charging plan pushes the state of charge above its ceiling.
    #[error("charging plan error: {0}")]
    Plan(String),

    #[error("infeasible route: {0}")]
    InfeasibleRoute(String),

    #[error("infeasible clustering: {0}")]
    InfeasibleClustering(String),

    #[error("infeasible group{}: {message}", if *.timed_out { " (timeout)" } else { "" })]
    InfeasibleGroup { message: String, timed_out: bool },

    #[error("instance too large for exhaustive search: {0}")]
    RefusedTooLarge(String),

    #[error("no feasible solution: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
