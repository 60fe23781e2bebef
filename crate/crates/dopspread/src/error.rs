//! Error taxonomy shared by every fallible operation in the crate.
//!
//! Three classes cover all failure modes:
//!
//! * [`Error::Domain`] — an argument lies outside the mathematical domain of
//!   the operation (an angle outside `[0, π]`, a modulus `k ≥ 1`, an empty
//!   direction bank, a non-positive-definite moment matrix, …).
//! * [`Error::Dimension`] — related sequences disagree in length or shape
//!   (weights vs. array size, payload vs. frame capacity, …).
//! * [`Error::Numeric`] — a numerical procedure failed to meet its accuracy
//!   contract (quadrature that cannot reach tolerance within its panel
//!   budget, a factorization that breaks down, a normalization of a zero
//!   vector). The message names the offending quantity so the failure can be
//!   traced to a concrete integral or matrix entry.

use std::fmt;

/// Crate-wide error type. The message carries the concrete context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    Domain(String),
    /// Mismatched lengths or shapes between related sequences.
    Dimension(String),
    /// A numerical procedure failed to meet its accuracy contract.
    Numeric(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_includes_class_and_context() {
        let e = Error::Domain("theta = 3.5 outside [0, pi]".into());
        assert_eq!(e.to_string(), "domain error: theta = 3.5 outside [0, pi]");
        let e = Error::Dimension("weights length 3 != array size 4".into());
        assert!(e.to_string().starts_with("dimension error: "));
        let e = Error::Numeric("quadrature stalled".into());
        assert!(e.to_string().contains("quadrature stalled"));
    }
}
