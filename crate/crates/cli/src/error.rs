use lindblad_core::Error as CoreError;
use thiserror::Error;

/// Failures mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource guard: {0}")]
    Guard(String),
    #[error("numeric failure: {0}")]
    Numeric(#[source] CoreError),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Output(_) => 1,
        }
    }

    /// Sorts a core error into the config, guard or numeric bucket.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::ResourceGuard { .. } => CliError::Guard(e.to_string()),
            CoreError::InvalidModel(_) | CoreError::MissingSeed(_) | CoreError::Parse { .. } => CliError::Config(e.to_string()),
            CoreError::Io(_) | CoreError::Json(_) | CoreError::Cache(_) => CliError::Output(e.to_string()),
            other => CliError::Numeric(other),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
