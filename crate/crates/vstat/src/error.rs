//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or configuration (CLI exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// Problems reading or validating input data (CLI exit code 3).
    #[error("data error: {0}")]
    Data(String),

    /// An estimator's preconditions were not met.
    #[error("estimator error: {0}")]
    Estimator(String),

    /// A brute-force oracle would exceed its evaluation budget.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn estimator(msg: impl Into<String>) -> Self {
        Error::Estimator(msg.into())
    }
}
