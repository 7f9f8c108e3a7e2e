use nalgebra::DMatrix;
use thiserror::Error;

use crate::spd::SpdMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("rank deficient: {0}")]
    Rank(String),

    #[error("Karcher mean did not converge after {iterations} iterations (residual {residual:.3e})")]
    KarcherNotConverged {
        iterations: usize,
        residual: f64,
        last: Box<SpdMatrix>,
    },

    #[error(
        "rotation search did not converge from any start (best objective {objective:.3e}, gradient norm {grad_norm:.3e})"
    )]
    RotationNotConverged {
        objective: f64,
        grad_norm: f64,
        best: Box<DMatrix<f64>>,
    },

    #[error("cannot build folds: {0}")]
    Fold(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("subject {subject:?}, trial {trial}: {reason}")]
    Validation {
        subject: String,
        trial: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for failures caused by the data (bad files, invalid matrices, too few trials).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Parse { .. } | Error::Validation { .. } | Error::Fold(_) | Error::Io(_)
        )
    }

    /// True for failures of a numerical routine.
    pub fn is_numerical_error(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_)
                | Error::Rank(_)
                | Error::KarcherNotConverged { .. }
                | Error::RotationNotConverged { .. }
                | Error::Training(_)
        )
    }
}
