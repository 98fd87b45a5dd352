//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A corpus file line that failed to parse, with its 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation: {0}")]
    Validation(String),

    #[error("config: {0}")]
    Config(String),

    #[error("model: {0}")]
    Model(String),

    #[error("stats: {0}")]
    Stats(String),
}

pub type Result<T> = std::result::Result<T, Error>;
