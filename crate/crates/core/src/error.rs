use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Unsupported group/space or malformed configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument violates a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A linear solve or factorisation failed.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// No fundamental set could be found for a level.
    #[error("degenerate level: {0}")]
    DegenerateLevel(String),
    /// Points or kernels live on different spaces.
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
