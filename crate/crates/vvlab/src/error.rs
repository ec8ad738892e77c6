use thiserror::Error;

/// Error type shared across the crate. The variants map onto the CLI exit
/// codes: `Config` -> 2, `Numerical` -> 3, `PropertyViolation` -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical abort: {0}")]
    Numerical(String),

    #[error("property violation: {0}")]
    PropertyViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Numerical(_) => 3,
            Error::PropertyViolation(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
