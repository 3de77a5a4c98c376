//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation's inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A data file row could not be parsed. `line` is the 1-based physical
    /// line number, counting the header.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A point mapped to (or too near) the line at infinity.
    #[error("projection error: {0}")]
    Projection(String),

    /// Pipeline stage failure, qualified with the stage name.
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn stage(stage: &str, msg: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
