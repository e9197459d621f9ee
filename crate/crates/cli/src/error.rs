use std::fmt;

/// Failure of a command, mapped to the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments, or input files (exit 2).
    Invalid(String),
    /// Training produced a non-finite value (exit 3).
    Diverged(String),
    /// Anything else, such as I/O failure (exit 1).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Diverged(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<resetless::Error> for CliError {
    fn from(e: resetless::Error) -> Self {
        match e {
            resetless::Error::NonFinite(m) => CliError::Diverged(format!("training diverged: {m}")),
            resetless::Error::Config(m) => CliError::Invalid(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}
