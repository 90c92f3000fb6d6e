use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or geometry supplied by the caller.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Input data that parses but violates a mathematical precondition.
    #[error("data error: {0}")]
    Data(String),

    /// A lattice access fell outside the box that owns the values.
    #[error("point {point:?} is outside box lo={lo:?} hi={hi:?}")]
    OutOfBox {
        point: Vec<i64>,
        lo: Vec<i64>,
        hi: Vec<i64>,
    },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A configured size budget was exceeded.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// Internal invariant violated; always a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
