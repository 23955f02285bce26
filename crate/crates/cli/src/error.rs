use thiserror::Error;

/// CLI failure with a category that determines the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or values. Exit code 2.
    #[error("usage error: {0}")]
    Usage(String),
    /// Missing, unreadable or malformed input files and artifacts. Exit code 3.
    #[error("data error: {0}")]
    Data(String),
    /// The computation itself failed. Exit code 4.
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Run(_) => 4,
        }
    }
}

impl From<ptbae::Error> for CliError {
    fn from(e: ptbae::Error) -> Self {
        use ptbae::Error as E;
        match e {
            E::Config(_) => CliError::Usage(e.to_string()),
            E::Io { .. } | E::NonNumeric { .. } | E::RaggedRow { .. } | E::Format { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
