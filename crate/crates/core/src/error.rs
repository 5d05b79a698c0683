use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("missing spatial derivative for drift `{0}`")]
    MissingDerivative(String),

    #[error("explosion detected on path {path} at step {step} (x = {value})")]
    ExplosionDetected {
        path: usize,
        step: usize,
        value: f64,
    },

    #[error("log-weight overflow on path {path} at step {step}")]
    WeightOverflow { path: usize, step: usize },

    #[error("quadrature diverged: {0}")]
    Divergent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
