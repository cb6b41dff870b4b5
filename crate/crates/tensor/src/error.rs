use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs} vs {rhs}")]
    ShapeMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },
    #[error("expected a scalar, got shape {0}")]
    NotScalar(String),
    #[error("model dim {dim} is not divisible by {heads} heads")]
    HeadSplit { dim: usize, heads: usize },
    #[error("{op}: axis {axis} out of range for a 2-d tensor")]
    InvalidAxis { op: &'static str, axis: usize },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("no gradient for parameter {0:?}")]
    MissingGrad(String),
    #[error("unknown parameter {0:?}")]
    MissingParam(String),
    #[error("dropout requested but the tape has no rng")]
    NoRng,
    #[error("invalid argument: {0}")]
    Invalid(String),
}
