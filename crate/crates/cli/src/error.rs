use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] qduffing_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("replay differs from the manifest in {0:?}")]
    ReplayMismatch(Vec<String>),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 1 usage, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        use qduffing_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(E::Truncation { .. } | E::NoSolution { .. }) => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } | CliError::Format { .. } => 3,
            CliError::ReplayMismatch(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
