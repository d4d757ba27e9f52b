use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid too small: need at least {min} nodes, got {got}")]
    Size { min: usize, got: usize },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("stability guard violated: dt = {dt:e} exceeds limit {limit:e}")]
    Guard { dt: f64, limit: f64 },

    #[error("non-finite state at t = {time}")]
    BlowUp { time: f64 },

    #[error("eigenvalue bracket failure for mode {k}: {report}")]
    Bracket { k: usize, report: String },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("no periodic oscillation detected: {0}")]
    NoOscillation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
