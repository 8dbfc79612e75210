use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] lrp_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 1 for failed checks, 2 for bad input, 3 for size
    /// limits.
    pub fn exit_code(&self) -> i32 {
        use lrp_core::Error as E;
        match self {
            CliError::Verification(_) => EXIT_FAILED,
            CliError::Usage(_) | CliError::Format { .. } | CliError::Io { .. } => EXIT_USAGE,
            CliError::Core(e) => match e {
                E::Resource(_) => EXIT_RESOURCE,
                E::InvalidParams(_)
                | E::DegenerateEdge(_)
                | E::ZeroOffset
                | E::DimensionMismatch { .. }
                | E::OutOfDomain(_)
                | E::InvalidConfiguration(_)
                | E::Precondition(_) => EXIT_USAGE,
                E::MalformedTrace(_) | E::CouplingViolated(_) | E::FitFailure(_) => EXIT_FAILED,
            },
        }
    }
}
