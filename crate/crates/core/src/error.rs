use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty distribution")]
    EmptyDistribution,

    #[error("unequal sample counts: {0} vs {1}")]
    UnequalSampleCounts(usize, usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("not a metric order: p = {0} < 1")]
    NotAMetricOrder(f64),

    #[error("cloud of {n} points exceeds the exact-W2 cap of {cap}; subsample first")]
    SizeCapExceeded { n: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch at stage `{stage}`: expected input of length {expected}, got {got}")]
    ShapeMismatch {
        stage: String,
        expected: usize,
        got: usize,
    },

    #[error("timestep {0} is not part of the schedule")]
    StepNotInSchedule(usize),

    #[error("covariance of component {0} is not symmetric positive definite")]
    NotPositiveDefinite(usize),

    #[error("missing conditional model for label `{0}`")]
    MissingConditional(String),

    #[error("non-finite loss at step {step}, inner iteration {inner}")]
    NonFiniteLoss { step: usize, inner: usize },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
