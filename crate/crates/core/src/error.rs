use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid vehicle configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("state has {got} trailer headings but the configuration has {expected} trailers")]
    TrailerCountMismatch { expected: usize, got: usize },
    #[error("context map shape {got:?} does not match grid shape {expected:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scenario generation failed: {0}")]
    Generation(String),
    #[error("safety violation at step {step}: {detail}")]
    SafetyViolation { step: u64, detail: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
