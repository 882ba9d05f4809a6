use thiserror::Error;

/// Exit status for a run whose checks all passed.
pub const EXIT_PASS: u8 = 0;
/// Exit status when at least one check failed.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for unusable input.
pub const EXIT_INVALID_INPUT: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunnerError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("cannot compare reports: {0}")]
    Incomparable(String),

    #[error(transparent)]
    Core(#[from] qtomo::Error),
}

impl RunnerError {
    /// Name of the offending config field, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Config { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for RunnerError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
