use thiserror::Error;

/// Errors raised by the library. Each variant maps to a CLI exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdkError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid generator: {0}")]
    Generator(String),
    #[error("chain is not reversible: {0}")]
    Reversibility(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl MdkError {
    /// Exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            MdkError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MdkError>;
