use thiserror::Error;

/// Errors raised by the laboratory.
///
/// `Numerical` marks a breached numerical contract (boundary-mass monitor,
/// non-finite state, solver bias check); the command line maps it to exit
/// code 2, everything else to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible inputs: {0}")]
    Mismatch(String),

    #[error("numerical contract breached: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for breaches of a numerical contract.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
