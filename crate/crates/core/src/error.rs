//! Crate-wide error type.
//!
//! Every fallible operation distinguishes validation failures (bad input)
//! from budget failures (input is well-formed but too large for the exact
//! algorithm). The CLI maps these to distinct exit codes.

use thiserror::Error;

/// Errors produced by the kernel calculus and its pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Input violates an invariant (non-finite value, bad measure sum,
    /// dimension mismatch, out-of-range parameter, unparsable spec, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Input is valid but exceeds the documented budget of an exact
    /// algorithm. The message names the budget and, where it exists,
    /// the scalable alternative.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A premise of a conditional check does not hold, so the check
    /// cannot return a meaningful boolean.
    #[error("premise violated: {0}")]
    Premise(String),

    /// Exact cut-distance alignment is impossible because the step
    /// measure multisets of the two kernels do not match.
    #[error("step measures not alignable: {0}")]
    NotAlignable(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
