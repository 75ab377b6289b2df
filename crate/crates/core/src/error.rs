use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("trajectory diverged; last finite state at t = {last_good}")]
    Divergence { last_good: f64 },

    #[error("empty record: {0}")]
    EmptyRecord(&'static str),

    #[error("oracle inapplicable: {0}")]
    OracleInapplicable(String),
}
