use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("malformed metadata: {0}")]
    Metadata(String),

    #[error("degenerate mixture fit: {0}")]
    DegenerateFit(String),

    #[error("frame {end} cannot end a {len}-frame clip")]
    ClipBoundary { end: usize, len: usize },

    #[error("video has {frames} frames but a clip needs {needed}")]
    VideoTooShort { frames: usize, needed: usize },

    #[error("clip has {frames} frames; temporal features need at least 2")]
    ClipTooShort { frames: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("backward called without a cached forward pass")]
    NoForwardCache,

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            err @ Error::Stage { .. } => err,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
