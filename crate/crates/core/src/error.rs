use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The angle grid cannot resolve every harmonic of the result.
    #[error("band limit violated: {0}")]
    BandLimit(String),

    /// A truncated OAM window would discard more than the allowed mass.
    #[error("truncation: {reason}; required window {required_min}:{required_max}")]
    Truncation {
        reason: String,
        required_min: i64,
        required_max: i64,
    },

    /// The Wigner samples do not determine the requested matrix elements.
    #[error("reconstruction is rank deficient along {}", directions.join(", "))]
    RankDeficient { directions: Vec<String> },

    /// A computation that must be real produced a non-negligible imaginary part.
    #[error("non-real result: max |Im| = {max_imag:e} at {location}")]
    NotReal { max_imag: f64, location: String },

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// `true` for failures caused by the numbers rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BandLimit(_)
                | Error::Truncation { .. }
                | Error::RankDeficient { .. }
                | Error::NotReal { .. }
        )
    }
}
