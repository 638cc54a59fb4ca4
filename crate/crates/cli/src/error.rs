use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("model rejected: {0}")]
    ModelInvalid(glorenz::Error),
    #[error("experiment {experiment} failed: {source}")]
    ExperimentFailed {
        experiment: &'static str,
        #[source]
        source: glorenz::Error,
    },
    #[error("no experiment artifacts in {}", .0.display())]
    MissingArtifacts(PathBuf),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::ModelInvalid(_) => 3,
            CliError::ExperimentFailed { .. } => 4,
            CliError::MissingArtifacts(_) => 5,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}
