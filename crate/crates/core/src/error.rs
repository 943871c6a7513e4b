use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-positive rate on channel {channel}: value {value} at t = {t}")]
    NonPositiveRate { channel: usize, t: f64, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Adaptive step control collapsed; `t` is the last time reached.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error(
        "periodic orbit not found after {periods} periods \
         (last period-map displacement {last_displacement:e}, contraction ratio {last_ratio})"
    )]
    OrbitNotConverged {
        periods: usize,
        last_displacement: f64,
        last_ratio: f64,
    },

    /// The equilibrium consistency function did not change sign. A solution
    /// always exists for positive rates, so this indicates a bug.
    #[error("equilibrium bracket failure: {0}")]
    Bracket(String),

    #[error("scenario field `{field}`: {message}")]
    Scenario { field: String, message: String },

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn scenario(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::InvalidState(_)
                | Error::NonPositiveRate { .. }
                | Error::InvalidArgument(_)
                | Error::Scenario { .. }
                | Error::FileNotFound(_)
                | Error::Json(_)
        )
    }
}
