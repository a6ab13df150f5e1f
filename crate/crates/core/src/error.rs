use alloc::string::String;

/// Errors raised by the core routines.
///
/// Variants fall in two families: [`Error::is_validation`] reports bad
/// input or parameters, everything else is a numerical failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("singular design: {rank_deficiency} of {columns} columns are linearly dependent")]
    Singular {
        columns: usize,
        rank_deficiency: usize,
    },

    #[error("row {row} has leverage {leverage} (>= 1 - 1e-12)")]
    LeverageOne { row: usize, leverage: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    /// True for input and configuration problems, false for numerical failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidData(_)
            | Error::DimensionMismatch { .. } => true,
            Error::Fold { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    /// Strips any fold wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fold { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
