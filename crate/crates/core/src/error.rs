//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by loading, fitting, scoring and testing.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input that could not be parsed (carries the 1-based line).
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    /// Structurally valid input that violates a domain invariant.
    #[error("{0}")]
    Domain(String),
    /// A numerical routine failed to meet its accuracy contract.
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
