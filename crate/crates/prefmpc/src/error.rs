use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug)]
pub enum Error {
    Core(prefmpc_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed document; `line`/`column` are 1-based.
    Parse {
        path: Option<PathBuf>,
        line: usize,
        column: usize,
        message: String,
    },
    UnsupportedVersion { found: u32, supported: u32 },
    /// Well-formed document with inconsistent content.
    Format(String),
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: Option<PathBuf>, e: serde_json::Error) -> Self {
        Error::Parse {
            path,
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "{e}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Parse {
                path,
                line,
                column,
                message,
            } => {
                if let Some(p) = path {
                    write!(f, "{}:{line}:{column}: {message}", p.display())
                } else {
                    write!(f, "line {line}, column {column}: {message}")
                }
            }
            Error::UnsupportedVersion { found, supported } => {
                write!(f, "unsupported file version {found} (this build reads version {supported})")
            }
            Error::Format(msg) => write!(f, "invalid document: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Core(e) => Some(e),
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<prefmpc_core::Error> for Error {
    fn from(e: prefmpc_core::Error) -> Self {
        Error::Core(e)
    }
}
