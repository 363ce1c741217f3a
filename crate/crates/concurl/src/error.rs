//! Crate-wide error type and the exit codes the CLI maps it to.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor ranks or dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A computation produced or received non-finite values, or a numeric
    /// routine cannot proceed (degenerate prototypes, failed convergence).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A data file is malformed or inconsistent.
    #[error("data error: {0}")]
    Data(String),
    /// A configuration value is invalid or internally inconsistent.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for data problems, 4 for numeric aborts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
