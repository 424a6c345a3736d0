//! Error type shared across the crate.

use std::fmt;
use std::io;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures the library reports.
///
/// Variants are grouped by who is at fault: `Config` means the caller built
/// an invalid configuration, `Contract` means a function precondition was
/// violated, `Format` means an input file is malformed, and `Io` wraps an
/// operating-system error with the path involved.
#[derive(Debug)]
pub enum Error {
    /// A configuration value is out of its documented domain.
    Config(String),
    /// A function was called with arguments violating its preconditions.
    Contract(String),
    /// A data file is structurally invalid (bad magic, truncation, ...).
    Format(String),
    /// An underlying I/O operation failed.
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    /// Builds an [`Error::Io`] tagging `source` with the file it concerned.
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Format(msg) => write!(f, "malformed data: {msg}"),
            Error::Io { path, source } => {
                write!(f, "i/o error on {}: {source}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
