use thiserror::Error;

/// Error kinds shared by every module. The CLI maps them onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller passed arguments that do not fit together (shape mismatch, bad flag values).
    #[error("usage error: {0}")]
    Usage(String),
    /// Mathematically undefined request, e.g. inverting zero or a singular matrix.
    #[error("domain error: {0}")]
    Domain(String),
    /// Problem exceeds the brute-force size limits.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// Constraint set is empty; `index` names the first violated constraint when known.
    #[error("infeasible problem (constraint {index:?}): {msg}")]
    Infeasible { index: Option<usize>, msg: String },
    /// A checked invariant failed at runtime.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn capacity<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Capacity(msg.into()))
}
