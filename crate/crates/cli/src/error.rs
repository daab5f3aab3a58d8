use std::fmt;
use std::path::Path;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or inputs that do not fit together.
    Usage(String),
    /// Unreadable, unwritable or malformed files.
    Io(String),
    /// A requested safety check did not hold.
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Io(_) => 2,
            Self::Assertion(_) => 3,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "error: {m}"),
            Self::Io(m) => write!(f, "I/O error: {m}"),
            Self::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

impl From<dmp_avoid::error::Error> for CliError {
    fn from(e: dmp_avoid::error::Error) -> Self {
        use dmp_avoid::error::Error as E;
        match e {
            E::Infeasible => Self::Assertion(e.to_string()),
            E::Io(_) | E::Json(_) | E::Parse { .. } | E::Format(_) => Self::Io(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

/// Attach the path to errors raised while reading or writing `path`.
pub trait PathContext<T> {
    fn at(self, path: &Path) -> Result<T, CliError>;
}

impl<T, E: Into<CliError>> PathContext<T> for Result<T, E> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|e| match e.into() {
            CliError::Io(m) => CliError::io(path, m),
            other => other,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
