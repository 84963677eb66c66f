use thiserror::Error;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Config error prefixed with the offending key path.
    pub fn at(path: &str, err: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{path}: {err}"))
    }
}

impl From<itokit::Error> for CliError {
    fn from(e: itokit::Error) -> Self {
        match e {
            itokit::Error::Format(m) => CliError::Io(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
