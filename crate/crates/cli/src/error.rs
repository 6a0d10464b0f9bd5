use std::fmt;
use std::path::PathBuf;

/// Command-level failures mapped onto the exit-code contract:
/// 0 success, 1 configuration error, 2 missing dependency artifact,
/// 3 numerical failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    MissingDependency(PathBuf),
    Core(cldfa_core::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::MissingDependency(path) => {
                write!(f, "missing dependency artifact: {}", path.display())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cldfa_core::Error> for CliError {
    fn from(e: cldfa_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::MissingDependency(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
