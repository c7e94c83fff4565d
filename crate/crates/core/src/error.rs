use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// Cholesky factorization failed even after jitter escalation.
    #[error("numerical failure in {context}: matrix not positive definite (min eigenvalue ~ {min_eigenvalue:e})")]
    NumericalFailure { context: String, min_eigenvalue: f64 },

    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing chain block `{0}`")]
    MissingBlock(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Validation(_) => "validation",
            Error::NumericalFailure { .. } => "numerical_failure",
            Error::Sweep { .. } => "sweep_failure",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::MissingBlock(_) => "missing_block",
            Error::Config(_) => "config",
        }
    }
}
