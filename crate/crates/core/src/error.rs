use thiserror::Error;

pub type Result<T> = std::result::Result<T, GicError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GicError {
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e} exceeds {tolerance:.3e})")]
    NonSkew { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not an se(3) element: {0}")]
    NotTwistMatrix(String),

    #[error("rotation matrix is not in SO(3): {0}")]
    NotRotation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("jacobian is near singular (condition number {cond:.3e} > {limit:.1e})")]
    NearSingularJacobian { cond: f64, limit: f64 },

    #[error("invalid robot model: {0}")]
    InvalidModel(String),

    #[error("invalid gains: {0}")]
    InvalidGains(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("time {t} outside trajectory range [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("rms of an empty series")]
    EmptySeries,

    #[error("unknown controller '{0}' (expected gic1, gic2, intuitive, benchmark or pd)")]
    UnknownController(String),

    #[error("simulation aborted at step {step}: {reason}")]
    SimulationAborted { step: usize, reason: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GicError {
    fn from(e: std::io::Error) -> Self {
        GicError::Io(e.to_string())
    }
}
