use crate::sequences::Symbol;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("no observable value for symbol {0}")]
    UnmappedSymbol(Symbol),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid epsilon {epsilon}: need beta0 - epsilon > alpha0 + epsilon (alpha0 = {alpha0}, beta0 = {beta0})")]
    InvalidEpsilon { epsilon: f64, alpha0: f64, beta0: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("state space infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}
