use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("invalid tracklet: {0}")]
    InvalidTracklet(String),

    #[error("tracklets overlap in time: [{a_start}, {a_end}] and [{b_start}, {b_end}]")]
    TemporalOverlap {
        a_start: u32,
        a_end: u32,
        b_start: u32,
        b_end: u32,
    },

    #[error("invalid point trajectory {id}: {reason}")]
    InvalidTrajectory { id: i64, reason: String },

    #[error("invalid affinity: {0}")]
    InvalidAffinity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid hyperedge: {0}")]
    InvalidEdge(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),

    #[error("size cap exceeded: {size} > {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from malformed input rather than a usage or
    /// internal problem.
    pub fn is_input_format(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Format(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidDetection(_)
                | Error::InvalidTrajectory { .. }
                | Error::InvalidEdge(_)
                | Error::InvalidAffinity(_)
        )
    }
}
