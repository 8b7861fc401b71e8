use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pulse spectrum exceeds mode bandwidth: {leakage:.3e} of the energy lies outside the grid (limit {limit:.1e})")]
    BandwidthExceeded { leakage: f64, limit: f64 },

    #[error("time {t} is not covered by the Stark schedule [{start}, {end}]")]
    ScheduleGap { t: f64, start: f64, end: f64 },

    #[error("step too large: dt * max|detuning| = {product:.4} (must be < {limit})")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("phase undefined: {0}")]
    UndefinedPhase(String),

    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),

    #[error("degenerate state: output has zero norm")]
    DegenerateState,

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::BandwidthExceeded { .. } | Error::StepTooLarge { .. } => ErrorKind::Numerical,
            Error::UndefinedPhase(_) | Error::DegenerateState => ErrorKind::Numerical,
            Error::Io(_) | Error::Json(_) => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
