use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config error in {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("data error: {0}")]
    Data(#[source] neglearn::Error),

    #[error("data error: {0}")]
    DataSpec(String),

    #[error("training diverged at epoch {epoch}: {source}; last good model saved to {saved}")]
    Diverged {
        epoch: usize,
        saved: PathBuf,
        #[source]
        source: neglearn::Error,
    },

    #[error("training diverged for Q = {0:?}")]
    SweepDiverged(Vec<usize>),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(neglearn::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => exit::CONFIG,
            CliError::Data(_) | CliError::DataSpec(_) => exit::DATA,
            CliError::Diverged { .. } | CliError::SweepDiverged(_) => exit::DIVERGED,
            CliError::Output { .. } | CliError::Core(_) => exit::FAILURE,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }
}

/// Routes core errors by what they say about the inputs: malformed or
/// missing data is a data error, bad hyperparameters a config error.
impl From<neglearn::Error> for CliError {
    fn from(e: neglearn::Error) -> Self {
        use neglearn::Error as E;
        match e {
            E::Io { .. } | E::Parse { .. } | E::InsufficientData(_) => CliError::Data(e),
            E::InvalidArgument(m) => CliError::Config(m),
            E::Diverged { .. } => CliError::Core(e),
            other => CliError::Core(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
