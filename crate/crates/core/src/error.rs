use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index}, threshold {threshold:.3e})")]
    NotPositiveDefinite {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("degrees of freedom {dof} must exceed dimension {dim}")]
    DofTooSmall { dim: usize, dof: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid network definition: {0}")]
    InvalidSpec(String),

    #[error("Laplace transform undefined: 1 + alpha*scale*c has eigenvalue {min_eigenvalue:.3e} <= 0")]
    EigenvalueViolation { min_eigenvalue: f64 },

    #[error("importance weights degenerate: effective sample size {ess:.2} < {threshold}")]
    DegenerateWeights { ess: f64, threshold: f64 },

    #[error("design matrix is rank deficient: smallest Gram eigenvalue {min_eigenvalue:.3e} below {threshold:.3e}")]
    RankDeficientDesign { min_eigenvalue: f64, threshold: f64 },

    #[error("Gram matrix is singular: {0}")]
    SingularGram(String),

    #[error("quadrature over {layers} layers exceeds the tensor-product limit of {max}")]
    MethodCostExceeded { layers: usize, max: usize },

    #[error("objective is not finite at the current point")]
    NonFiniteObjective,

    #[error("no interior minimum in ({lo:.3e}, {hi:.3e})")]
    NoInteriorMinimum { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
