use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown mode index {0}")]
    UnknownMode(usize),

    #[error("singular constraint system in {0}")]
    SingularConstraint(&'static str),

    #[error("state violates the active constraint: residual {residual:.3e} > tolerance {tol:.3e}")]
    ConstraintViolation { residual: f64, tol: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("event localization failed at t = {t:.6} s: {reason}")]
    EventLocalization { t: f64, reason: String },

    #[error("trajectory has no samples")]
    EmptyTrajectory,

    #[error("unsupported collocation degree {0}")]
    UnsupportedDegree(usize),

    #[error("transcription error: {0}")]
    Transcription(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
