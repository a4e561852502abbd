//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by map construction, positioning, detection, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (empty input, bad ratio, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A data or configuration file could not be parsed.
    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        /// Offending file, or a pseudo-path such as `<config>` for in-memory text.
        path: String,
        /// 1-based line number of the offending record (0 when unknown).
        line: u64,
        message: String,
    },

    /// A numerical routine failed (singular system, non-finite intermediate).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }

    pub(crate) fn parse(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
