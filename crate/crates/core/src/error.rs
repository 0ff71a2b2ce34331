use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid kernel parameter: {0}")]
    KernelParameter(String),
    #[error("tabulated kernel: {0}")]
    Tabulated(String),
    #[error("kernel derivative requested at r = 0 for a kernel that is not C^1 at the origin")]
    DerivativeAtOrigin,
    #[error("validation grid needs at least 3 sorted nonnegative points, got {0}")]
    GridTooSmall(usize),
    #[error("integrand is not finite at r = {0}")]
    NonFiniteIntegrand(f64),
    #[error("quadrature failed to converge on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },
    #[error("gap underflows on the fitting window; exponent cannot be fitted")]
    Unfittable,
    #[error("landmarks {0} and {1} coincide (configuration is off the manifold)")]
    Collided(usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Gram matrix is numerically singular (condition estimate {0:e})")]
    SingularGram(f64),
    #[error("criterion integral is inconclusive")]
    Inconclusive,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
