use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library. Each variant belongs to one of the
/// classes the command-line driver maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("level error: {0}")]
    Level(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operator metadata mismatch: {0}")]
    MetaMismatch(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Format,
    Geometry,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Format(_) | Error::Checksum { .. } | Error::Parse { .. } => ErrorClass::Format,
            Error::Dimension(_)
            | Error::Level(_)
            | Error::Shape(_)
            | Error::Index(_)
            | Error::Domain(_)
            | Error::MetaMismatch(_)
            | Error::Geometry(_)
            | Error::Degenerate(_) => ErrorClass::Geometry,
            Error::InvalidParameter(_) => ErrorClass::Usage,
        }
    }
}
