//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter fell outside its admissible domain.
    #[error("invalid {name}: {reason} (got {value})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The requested derivative order cannot be computed for this function kind.
    #[error("derivative of order {order} unavailable for {kind}")]
    DerivativeUnavailable { kind: &'static str, order: u32 },

    /// The operation is defined only on a restricted argument range.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A statistical test could not be formed, e.g. too few bins after pooling.
    #[error("degenerate test: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
