//! Crate-wide error type. Every fallible public operation returns
//! [`Result`]; variants distinguish caller mistakes (bad action, bad
//! model, bad argument) from resource limits and I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An action references an unknown variable, assigns a value outside
    /// its arity, or touches the reward variable.
    #[error("invalid action: {0}")]
    InvalidAction(String),

    /// Model construction or deserialization violated a structural
    /// invariant (cycle, malformed CPT, arity mismatch).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An exact enumeration would exceed the configured state-space cap.
    #[error("state space of size {size} exceeds cap {cap}")]
    CapacityExceeded { size: usize, cap: usize },

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A logged sample has zero probability under the sampling mixture but
    /// positive probability under a target action, so its importance
    /// weight is undefined. Indicates the sample did not come from the
    /// stated design.
    #[error("inconsistent sample: zero mixture probability but P_a = {p_a}")]
    RatioInconsistency { p_a: f64 },

    /// An experiment configuration failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
