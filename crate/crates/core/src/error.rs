use thiserror::Error;

/// Errors raised by the library. Each variant names the operation that
/// rejected its input so that CLI messages point at the failing step.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("{op}: dimension mismatch ({left} vs {right})")]
    DimensionMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{op}: empty input set")]
    EmptySet { op: &'static str },

    #[error("{op}: infeasible construction: {msg}")]
    Infeasible { op: &'static str, msg: String },

    #[error("{op}: degenerate condenser: {msg}")]
    Degenerate { op: &'static str, msg: String },

    #[error("solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Reject non-finite or out-of-range reals with a uniform message.
pub(crate) fn ensure(cond: bool, op: &'static str, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(op, msg()))
    }
}
