use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected} coefficients, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("wavevector must be nonzero")]
    ZeroWavevector,
    #[error("input must have zero mean")]
    NonzeroMean,
    #[error("solver blow-up at t = {time}: {reason}")]
    BlowUp { time: f64, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
