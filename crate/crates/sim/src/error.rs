use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{origin}:{line}: {msg}")]
    Config { origin: String, line: usize, msg: String },
    #[error("{path}:{line}: {msg}")]
    Log { path: PathBuf, line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] racing_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io { path: path.into(), source }
    }

    /// Configuration or input problems, as opposed to failures while running.
    pub fn is_usage(&self) -> bool {
        use racing_core::Error as E;
        matches!(
            self,
            SimError::Config { .. }
                | SimError::Invalid(_)
                | SimError::Core(E::InvalidParameter(_) | E::Parse { .. } | E::NonPositiveDimension(_))
        )
    }
}
