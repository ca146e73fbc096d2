use std::fmt::Display;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0} of {1} solves did not converge")]
    NotConverged(usize, usize),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(key: &str, e: impl Display) -> Self {
        CliError::Config(format!("{key}: {e}"))
    }

    pub fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(..) => 3,
            CliError::Runtime(_) => 4,
        })
    }
}
