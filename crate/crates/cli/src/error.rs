use std::fmt::Display;

/// Failure classes and their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config file, or catalog (exit 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// Unreadable or out-of-range design (exit 2).
    #[error("invalid design: {0}")]
    Validation(String),
    /// Failure while running or writing results (exit 3).
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn validation(e: impl Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}
