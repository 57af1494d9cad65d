use thiserror::Error;

/// Errors raised across the mechanism, its solver and the evaluation tooling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {value} lies outside [-1, 1]")]
    Domain { value: f64 },

    #[error("{what} = {requested} exceeds the configured cap of {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("infeasible construction: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
