use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor dimensions do not match what an operation expects.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed TCLT bytes, pattern file, or schedule dump.
    #[error("format error: {0}")]
    Format(String),

    /// An activation does not fit the layer's declared precision.
    #[error("precision violation: value {value} does not fit in {cap} bits")]
    Precision { value: u16, cap: u8 },

    /// A tile schedule references promotion sites that do not exist.
    #[error("corrupt schedule: {0}")]
    CorruptSchedule(String),

    /// Invalid architecture or pattern parameters.
    #[error("bad config: {0}")]
    Config(String),

    /// Manifest contents are inconsistent or incomplete.
    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
