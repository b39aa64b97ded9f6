use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested tolerance or matrix order cannot be honoured at the
    /// working precision. `required` is a best estimate in bits, when known.
    #[error("precision exhausted at {bits} bits: {reason}")]
    PrecisionExhausted {
        bits: u32,
        required: Option<u32>,
        reason: String,
    },

    /// Cholesky factorisation lost positive definiteness at `pivot`.
    #[error("matrix is not positive definite (pivot {pivot} of order {order})")]
    NotPositiveDefinite { pivot: usize, order: usize },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("moment index {index} not available (source defined through {available})")]
    MomentOutOfRange { index: usize, available: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for this error class: 2 for bad configuration or
    /// input files, 3 for precision or convergence failures, 4 for a Hankel
    /// matrix that is not positive definite.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::MomentOutOfRange { .. } | Error::Parse { .. } | Error::Io(_) => 2,
            Error::PrecisionExhausted { .. } | Error::NonConvergence(_) => 3,
            Error::NotPositiveDefinite { .. } => 4,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn exhausted(bits: u32, reason: impl Into<String>) -> Self {
        Error::PrecisionExhausted {
            bits,
            required: None,
            reason: reason.into(),
        }
    }
}
