use thiserror::Error;

/// Errors raised by parsing, transformations and solvers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCap { what: &'static str, needed: u128, cap: u128 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("internal check failed: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "E_PARSE",
            Error::InvalidGame(_) => "E_INVALID_GAME",
            Error::Precondition(_) => "E_PRECONDITION",
            Error::ResourceCap { .. } => "E_RESOURCE_CAP",
            Error::Infeasible(_) => "E_INFEASIBLE",
            Error::Internal(_) => "E_INTERNAL",
        }
    }

    pub(crate) fn cap(what: &'static str, needed: impl Into<u128>, cap: impl Into<u128>) -> Error {
        Error::ResourceCap { what, needed: needed.into(), cap: cap.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
