use thiserror::Error;

use crate::instances::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("entry {index} is {value}, expected -1 or +1")]
    NotASpin { index: usize, value: f64 },

    #[error("arity {arity} exceeds the truth-table cap of {cap}")]
    ArityOverCap { arity: usize, cap: usize },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("constraint kind {0} is not symmetric")]
    NotSymmetric(&'static str),

    #[error("empty input to convolution")]
    EmptyInput,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("spin {index} = {value} lies outside the {relaxation} domain")]
    OutsideDomain {
        index: usize,
        value: f64,
        relaxation: crate::Relaxation,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite objective value while {0}")]
    NonFinite(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{0}")]
    Unsupported(String),
}
