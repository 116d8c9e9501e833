use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature too coarse for the requested mode count.
    #[error("resolution error: {points} quadrature points cannot resolve {modes} modes (need at least {required})")]
    Resolution {
        points: usize,
        modes: usize,
        required: usize,
    },

    #[error("numerical degeneracy in mode {mode}: {detail}")]
    Degenerate { mode: usize, detail: String },

    #[error("divergence detected at step {step}")]
    Divergence { step: usize },

    #[error("inconsistent state: {0}")]
    StateConsistency(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
