use std::path::PathBuf;

/// Errors raised by the mapping core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("point is behind the camera (z = {0})")]
    NonPositiveDepth(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("raster too small: {width}x{height}")]
    DegenerateSize { width: usize, height: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("timestamp mismatch at index {index}: {a} vs {b}")]
    TimestampMismatch { index: usize, a: f64, b: f64 },

    #[error("unknown label id {0}")]
    UnknownLabel(u8),

    #[error("degenerate depth: {0}")]
    DegenerateDepth(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(detail: impl Into<String>) -> Self {
        Error::DimensionMismatch(detail.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
