use thiserror::Error;

/// Errors raised by the expansion, its oracles and the enumerators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlveError {
    /// An input lies outside the domain of a function (pole, singular log).
    #[error("domain error: {0}")]
    Domain(String),

    /// Principal-branch logarithm would be evaluated across its cut.
    #[error("branch cut: {0}")]
    BranchCut(String),

    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An enumeration or evaluation would exceed the desk-scale budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// The requested combination is not supported by this implementation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A quadrature failed its self-convergence contract.
    #[error("unreliable quadrature: {0}")]
    Unreliable(String),

    /// Broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = MlveError> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !($cond) {
            return Err($crate::error::MlveError::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
