use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("no GF(2^{0}) reduction polynomial is configured")]
    UnsupportedTagLength(usize),

    #[error("no closed-form rate is available for {0}")]
    UnsupportedFormula(&'static str),

    #[error("reservoir exhausted: requested {requested} bits with {remaining} remaining")]
    ReservoirExhausted { requested: u64, remaining: u64 },

    #[error("feedback tag failed verification in round {round}")]
    FeedbackRejected { round: u64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
