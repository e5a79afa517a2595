use thiserror::Error;

/// Errors produced by the separation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{context}: matrix is {rows}x{cols}, expected square")]
    NotSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("vector of length {len} is not the vectorization of a square matrix")]
    NotPerfectSquare { len: usize },
    #[error("{context}: dimension must be positive")]
    ZeroDimension { context: &'static str },
    #[error("need at least {required} samples, found {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("channel {channel} is degenerate (second moment {second_moment:e})")]
    DegenerateChannel { channel: usize, second_moment: f64 },
    #[error("linear system is ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("{context}: non-finite value encountered")]
    NonFinite { context: &'static str },
    #[error("convergence order not estimable: {pairs} qualifying step pairs, need at least {required}")]
    NotEstimable { pairs: usize, required: usize },
    #[error("could not draw a mixing matrix with condition <= {target} in {attempts} attempts")]
    ConditionUnreachable { target: f64, attempts: usize },
    #[error("{context}: row or column {index} is identically zero")]
    ZeroLine { context: &'static str, index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
