use thiserror::Error;

/// Errors produced by state validation, sampling, decisions and experiments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state needs at least 2 components, got {0}")]
    TooFewOutcomes(usize),
    #[error("component {index} is negative ({value})")]
    NegativeComponent { index: usize, value: f64 },
    #[error("state is not normalized (sum or norm {0})")]
    NotNormalized(f64),
    #[error("state is the zero vector")]
    ZeroVector,
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("frame vectors are not orthonormal (worst deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("matrix is not unitary (worst deviation {0:e})")]
    NotUnitary(f64),
    #[error("system and observer states are of different kinds")]
    KindMismatch,
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("every likelihood ratio is zero")]
    AllRatiosZero,
    #[error("invalid barycentric weights: {0}")]
    InvalidBarycentric(String),
    #[error("invalid sampler: {0}")]
    InvalidSampler(String),
    #[error("rejection sampler gave up after {0} consecutive rejections")]
    RejectionExhausted(u64),
    #[error("degenerate simplex (normalized volume {0:e})")]
    DegenerateSimplex(f64),
    #[error("insufficient samples: {samples} < {required}")]
    InsufficientSamples { samples: u64, required: u64 },
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("expected count for bin {0} is not positive")]
    ZeroExpected(usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("linear map is singular")]
    SingularMap,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
