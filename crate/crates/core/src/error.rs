use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A prior, likelihood, or experiment definition failed validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// Data handed to an operation is outside its domain.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// An estimator failed inside one Monte Carlo replicate.
    #[error("replicate {rep} (seed {seed}) failed: {source}")]
    Replicate {
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors caused by the caller's configuration or data rather
    /// than by a failure during computation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Input(_))
    }
}
