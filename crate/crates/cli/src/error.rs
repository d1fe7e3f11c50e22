use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error("missing fixture {}", .0.display())]
    MissingFixture(PathBuf),

    #[error("invalid input: {0}")]
    Invalid(jamleg_core::Error),

    #[error("simulation failed: {0}")]
    Simulation(jamleg_core::Error),

    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::MissingFixture(_) | CliError::Invalid(_) => 1,
            CliError::Simulation(_) | CliError::Output(_) => 2,
        }
    }
}

impl From<jamleg_core::Error> for CliError {
    fn from(e: jamleg_core::Error) -> Self {
        use jamleg_core::Error as E;
        match e {
            E::InvalidSpec(_)
            | E::Parse(_)
            | E::Configuration(_)
            | E::UnknownCase(_)
            | E::LengthMismatch(..)
            | E::MissingConfigurations(_)
            | E::Json(_) => CliError::Invalid(e),
            _ => CliError::Simulation(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
