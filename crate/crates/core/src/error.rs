use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("regressors do not span R^{m} (singular value ratio {ratio:.3e})")]
    RankDeficient { m: usize, ratio: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("information matrix is singular or ill-conditioned")]
    SingularDesign,

    #[error("exchange step {alpha} outside [{lo}, {hi}]")]
    StepOutOfRange { alpha: f64, lo: f64, hi: f64 },

    #[error("determinant update factor {factor:.3e} too small")]
    NumericalBreakdown { factor: f64 },

    #[error("numerical anomaly: {0}")]
    NumericalAnomaly(String),

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("no regular starting design found in {tries} attempts")]
    NoRegularStart { tries: usize },

    #[error("design space of {n} points exceeds cap {cap}")]
    SizeOverflow { n: u128, cap: usize },

    #[error("points do not span R^{0}")]
    SpanFailure(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
