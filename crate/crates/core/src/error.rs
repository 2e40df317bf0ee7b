use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0} is not prime")]
    NotPrime(u64),

    /// The field has units beyond ±1 (d = -3 or d = -4).
    #[error("discriminant {0} has units other than ±1")]
    ExtraUnits(i64),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("search exhausted in {stage}: found {found} of {wanted} within bound {bound}")]
    SearchExhausted {
        stage: String,
        found: usize,
        wanted: usize,
        bound: u64,
    },

    #[error("integrity failure: {0}")]
    Integrity(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
