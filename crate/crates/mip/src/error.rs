use thiserror::Error;

use crate::model::VarId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MipError {
    #[error("variable {0:?} is not declared in the model")]
    UnknownVar(VarId),
    #[error("variable {var:?} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: VarId, lower: f64, upper: f64 },
    #[error("binary variable {0:?} must have bounds within {{0, 1}}")]
    BinaryBounds(VarId),
    #[error("product factor {0:?} must be binary")]
    NotBinary(VarId),
    #[error("product factor {0:?} needs finite bounds")]
    UnboundedFactor(VarId),
    #[error("epigraph needs at least 2 tangents, got {0}")]
    TooFewTangents(usize),
    #[error("constraint {index} has non-finite data")]
    NonFinite { index: usize },
    #[error("MPS parse error at line {line}: {message}")]
    Mps { line: usize, message: String },
}

/// Failures of the LP relaxation that are not a proof of infeasibility.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("model is invalid: {0}")]
    Model(#[from] MipError),
    #[error("numerical failure in the LP engine: {0}")]
    Numerical(String),
}
