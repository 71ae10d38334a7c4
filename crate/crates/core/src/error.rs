use alloc::string::String;

/// Errors reported by the signal pipelines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or input violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The input is well formed but numerically degenerate (zero variance,
    /// zero energy, zero loudness).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// Not enough material (frames, beats, duration) to compute a value.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, Error>;
