use thiserror::Error;

/// Error taxonomy shared by all modules.
///
/// Variants mirror the failure classes surfaced to callers: bad arguments,
/// resource ceilings, degenerate geometric inputs, parameters outside the
/// supported regime, and numerical solver breakdown.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The request would exceed a memory or work ceiling.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The input curve or point set is degenerate for the requested measurement.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The parameter is syntactically valid but outside the supported regime.
    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    /// A numerical solver lost its invariants (non-finite values, dead branch).
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Malformed input data (CSV/PGM parsing).
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        CoreError::Capacity(msg.into())
    }
    pub fn degenerate(msg: impl Into<String>) -> Self {
        CoreError::Degenerate(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        CoreError::Unsupported(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        CoreError::SolverFailure(msg.into())
    }
}
