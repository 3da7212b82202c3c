use std::path::PathBuf;

use gbs_core::GbsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed config, flags or input files.
    #[error("config error: {0}")]
    Config(String),

    #[error("{op}: {source}")]
    Core {
        op: &'static str,
        #[source]
        source: GbsError,
    },

    /// A resource guard stopped the run before it started the work.
    #[error("guard tripped: {0}")]
    Guard(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A validation check ran and failed its bound.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } => 2,
            Self::Core { source: GbsError::InvalidInput(_), .. } => 2,
            Self::Core { source: GbsError::Numerical(_), .. } => 3,
            Self::Core { source: GbsError::TermGuard { .. }, .. } | Self::Guard(_) => 4,
            Self::Check(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

/// Attach the failing operation's name to a core error.
pub trait Context<T> {
    fn during(self, op: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, GbsError> {
    fn during(self, op: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { op, source })
    }
}

pub type CliResult<T> = Result<T, CliError>;
