use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: no edge records found")]
    EmptyInput,

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("could only remove {achieved} of {target} edges without disconnecting the residual graph")]
    HoldoutUnreachable { target: usize, achieved: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("node {0} has zero signed degree")]
    IsolatedNode(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("insufficient classes: {0}")]
    InsufficientClasses(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure classes, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::NonFinite(_) | Error::NoConvergence(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
