use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (camera rig, pipeline knobs, dimensions).
    #[error("configuration error: {0}")]
    Config(String),

    /// An input fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bounding box covered no pixel with a valid depth.
    #[error("no valid depth inside the bounding box")]
    EmptyExtraction,

    /// The depth interval retained no points.
    #[error("depth filter left no points")]
    EmptyAfterFilter,

    /// A frame produced no height sample.
    #[error("frame has no height sample")]
    NoSample,

    /// Stage 1 produced no anchor detection for the scene.
    #[error("no height limit device detected in the scene")]
    NoDevice,

    /// No frame of the scene yielded an estimate.
    #[error("no frame produced a height estimate")]
    NoSceneEstimate,

    /// The requested tracker cannot run on the given frames.
    #[error("tracker unavailable: {0}")]
    TrackerUnavailable(String),

    /// Malformed binary or text payload.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// Semantically invalid record inside a well-formed document.
    #[error("validation error in frame {frame}: {message}")]
    Validation { frame: u64, message: String },

    /// Unknown option or argument value.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Format { .. }
                | Error::Validation { .. }
                | Error::Usage(_)
                | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
