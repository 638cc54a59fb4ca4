use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{0}` is not finite")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "eigenvalue ordering 0 < lambda1/2 <= -lambda3 < lambda1 < -lambda2 violated \
         (lambda1 = {lambda1}, lambda2 = {lambda2}, lambda3 = {lambda3}): {detail}"
    )]
    EigenvalueOrderViolation {
        lambda1: f64,
        lambda2: f64,
        lambda3: f64,
        detail: &'static str,
    },
    #[error("theta * (1/2)^alpha = {value} >= 1: the image of the return map escapes the section")]
    ThetaTooLarge { value: f64 },
    #[error(
        "theta * alpha * 2^(1-alpha) = {value} <= 1: the one-dimensional map is not expanding"
    )]
    ThetaTooSmall { value: f64 },
    #[error("leaf image [{lo}, {hi}] leaves the interval [-1/2, 1/2]")]
    LeafImageOutside { lo: f64, hi: f64 },
    #[error("the two branch images of the fiber map overlap (gap {gap})")]
    LeafImagesOverlap { gap: f64 },
    #[error("input lies on the singular line x = 0")]
    SingularInput,
    #[error("cell {0} is entirely singular")]
    DegenerateCell(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("grid shapes differ")]
    ShapeMismatch,
    #[error("return time is not integrable against the given density")]
    NonIntegrable,
    #[error("observable takes negative value {0}")]
    NegativeObservable(f64),
    #[error("standard error exceeds the signal for too many lags ({resolved} resolved)")]
    InsufficientSamples { resolved: usize },
    #[error("orbit landed on the singular line")]
    SingularOrbit,
    #[error("orbit never left the ball within {0} steps")]
    NeverLeft(u64),
    #[error("ball of radius {0} has no mass")]
    EmptyBall(f64),
    #[error("{fraction:.3} of samples censored at radius {radius}")]
    TooCensored { radius: f64, fraction: f64 },
    #[error("truncated quadrature is not stable (successive truncations differ by {0:e})")]
    DivergentIntegral(f64),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
