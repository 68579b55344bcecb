use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("calibration insufficient: n = {n} replications cannot resolve alpha = {alpha} (need n*alpha >= 20)")]
    CalibrationInsufficient { n: u64, alpha: f64 },

    #[error("numeric failure in {routine}: {detail}")]
    NumericFailure { routine: &'static str, detail: String },

    #[error("configuration invalid: {0}")]
    ConfigurationInvalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}
