use thiserror::Error;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable {0} appears in both operands of a tensor product")]
    SharedVariable(String),

    #[error("variable {0} is not part of the tensor")]
    UnknownVariable(String),

    #[error("variable {0} listed more than once")]
    DuplicateVariable(String),

    #[error("variable sets overlap on {0}")]
    Overlap(String),

    #[error("tensor is not normalized: total mass {mass}")]
    NotNormalized { mass: f64 },

    #[error("invalid probability entry {value} at flat index {index}")]
    InvalidEntry { index: usize, value: f64 },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{what}: slice {slice} sums to {mass}, not 1")]
    NonStochastic {
        what: String,
        slice: String,
        mass: f64,
    },

    #[error("operation requires exactly {expected} relay(s), model has {found}")]
    WrongArity { expected: usize, found: usize },

    #[error("subset mask {mask:#b} out of range for {n} relay(s)")]
    SubsetOutOfRange { mask: u32, n: usize },

    #[error("rate vector has {found} entries, expected {expected}")]
    RateVectorLength { expected: usize, found: usize },

    #[error("instance exceeds size limit: {0}")]
    SizeLimit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
}
