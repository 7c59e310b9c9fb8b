use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration; `key` is the dotted path of the offending field.
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Core(#[from] resonet_core::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 4 for a
    /// truncation alarm, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use resonet_core::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(E::InvalidArgument(_) | E::StepTooLarge { .. }) => 2,
            CliError::Core(E::NumericalFailure { .. } | E::Capacity { .. }) => 3,
            CliError::Core(E::TruncationOverflow { .. }) => 4,
            CliError::Core(E::Io(_)) | CliError::Io { .. } | CliError::ChecksFailed(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
