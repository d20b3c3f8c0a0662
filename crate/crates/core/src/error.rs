use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("depth bound {bound} exceeded by node at step {step}")]
    DepthExceeded { step: usize, bound: usize },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("branching {got} exceeds the maximum of {max}")]
    BranchingExceeded { got: usize, max: usize },
    #[error("numeric fault: {0}")]
    NumericFault(String),
    #[error("no valid action to select")]
    NoAction,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("trace format error at line {line}: {message}")]
    TraceFormat { line: usize, message: String },
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
