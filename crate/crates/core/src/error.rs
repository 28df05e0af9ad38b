use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: the truncated basis needs at least 2 states")]
    InvalidDimension { dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("truncated basis too small: dim {dim} < required {required}")]
    Truncation { dim: usize, required: usize },

    #[error("truncation leak at tau = {tau}: top-level population {population:.3e} exceeds {threshold:.1e}")]
    TruncationLeak {
        tau: f64,
        population: f64,
        threshold: f64,
    },

    #[error("numerical blow-up at tau = {tau}")]
    NumericalBlowup { tau: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("division by zero: beta must be non-zero")]
    ZeroBeta,

    #[error("no solution: delta_asymp = {delta_asymp} must lie in (0, beta = {beta})")]
    NoSolution { delta_asymp: f64, beta: f64 },

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("separation must be positive on the fit window, got {value} at tau = {tau}")]
    NonPositiveSeparation { tau: f64, value: f64 },

    #[error("fit window [{start}, {end}] holds {points} points, need at least 3")]
    InsufficientData { start: f64, end: f64, points: usize },

    #[error("dimension {dim} exceeds the dense-evolution guard of {max}")]
    DimensionGuard { dim: usize, max: usize },

    #[error("positivity violated at tau = {tau}: minimum eigenvalue {min_eigenvalue:.3e}; reduce the step size")]
    PositivityViolation { tau: f64, min_eigenvalue: f64 },

    #[error("singular pivot at row {row} during band factorization")]
    SingularPivot { row: usize },

    #[error("zero-norm state cannot be normalized")]
    ZeroNorm,

    #[error("trajectory failed (pair {pair}, endpoint {endpoint}, realization {realization}): {source}")]
    Trajectory {
        pair: usize,
        endpoint: usize,
        realization: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (leaks, blow-ups, positivity) as
    /// opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::TruncationLeak { .. }
            | Error::NumericalBlowup { .. }
            | Error::PositivityViolation { .. }
            | Error::SingularPivot { .. }
            | Error::ZeroNorm => true,
            Error::Trajectory { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
