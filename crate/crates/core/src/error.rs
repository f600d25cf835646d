use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix entry at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate})")]
    ConvergenceFailure { estimate: f64, iterations: usize },

    #[error("unsupported block norm order (a = {a}, b = {b})")]
    UnsupportedOrder { a: String, b: String },

    #[error("row {0} has (numerically) zero l2 norm")]
    ZeroRow(usize),

    #[error("log argument p - s = {0} is below 2")]
    DegenerateLogArgument(f64),

    #[error("column {0} of the coefficient matrix has empty support")]
    EmptyColumnSupport(usize),

    #[error("restricted Gram matrix is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("coefficient family does not fit the requested shape: {0}")]
    BadFamilyShape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("success curve never crosses 0.5")]
    NoCrossing,
}
