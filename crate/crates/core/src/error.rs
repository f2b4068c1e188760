use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("sphere grid of order {order} cannot resolve harmonics up to degree {degree}")]
    InsufficientExactness { order: usize, degree: usize },
    #[error("adaptive quadrature did not converge (error estimate {estimate:e} after {intervals} intervals)")]
    QuadratureNotConverged { estimate: f64, intervals: usize },
    #[error("radial moment g({degree}, k={k}) = {value:e} is below the floor {floor:e}: degree {degree} is unreachable at this wavenumber")]
    UnreachableDegree {
        degree: usize,
        k: f64,
        value: f64,
        floor: f64,
    },
    #[error("smallest denominator modulus {min_modulus:e} does not exceed threshold {threshold:e}; the pattern norm is too large, rescale it (or use autoscaling)")]
    DenominatorTooSmall { min_modulus: f64, threshold: f64 },
    #[error("scattering solve failed: {reason}")]
    SolverFailure {
        reason: String,
        condition_estimate: Option<f64>,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
