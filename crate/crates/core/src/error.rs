use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Error)]
pub enum GbsError {
    /// Shapes or parameters that do not describe a valid problem.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear-algebra routine failed or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A kernel call would exceed the configured term budget.
    #[error("term count {terms} exceeds the guard of {limit} terms")]
    TermGuard { terms: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, GbsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GbsError::InvalidInput(msg.into()))
}
