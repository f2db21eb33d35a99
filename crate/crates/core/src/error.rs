use thiserror::Error;

/// Errors raised by the simulator, the trainer and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WpnnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid port partition: {0}")]
    InvalidPartition(String),

    #[error("resolvent (I - Phi S_SS) is singular or too close to singular: {0}")]
    SingularResolvent(String),

    #[error("eigenvalue solver did not converge for a {0}x{0} block")]
    EigenFailure(usize),

    #[error("passivity violated: largest singular value {sigma_max:.12} at {frequency_hz:.6e} Hz")]
    PassivityViolation { sigma_max: f64, frequency_hz: f64 },

    #[error("input outside the encodable domain [0, 1]: x = {0}")]
    DomainError(f64),

    #[error("frequency grid error: {0}")]
    GridError(String),

    #[error("target vector has zero energy; NMSE is undefined")]
    DegenerateTarget,

    #[error("filter design error: {0}")]
    FilterDesignError(String),

    #[error("operation not available for this model configuration: {0}")]
    ModeError(String),

    #[error("non-finite gradient component at weight ({row}, {col})")]
    NonFiniteGradient { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, WpnnError>;

impl From<serde_json::Error> for WpnnError {
    fn from(e: serde_json::Error) -> Self {
        WpnnError::Serialization(e.to_string())
    }
}
