use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::lcid::DesignResult;

/// Failures raised by the design kernels and estimators.
#[derive(Debug, Clone)]
pub enum Error {
    /// A precondition on an argument does not hold.
    InvalidArgument(String),
    /// A decomposition failed or produced non-finite values.
    Numeric(String),
    /// A matrix expected to be positive semidefinite has a clearly negative eigenvalue.
    NotPsd { min_eigenvalue: f64, tolerance: f64 },
    /// The listed columns are (numerically) linearly dependent on the others.
    RankDeficient { columns: Vec<usize> },
    /// Column with zero norm where a direction is required.
    ZeroColumn(usize),
    /// The design loop finished with an (almost) singular transformation.
    DegenerateDesign {
        condition_number: f64,
        result: Box<DesignResult>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Numeric(msg) => write!(f, "numerical failure: {msg}"),
            Error::NotPsd {
                min_eigenvalue,
                tolerance,
            } => write!(
                f,
                "matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -{tolerance:e}"
            ),
            Error::RankDeficient { columns } => {
                write!(f, "rank-deficient regressor, dependent columns {columns:?}")
            }
            Error::ZeroColumn(j) => write!(f, "column {j} has zero norm"),
            Error::DegenerateDesign {
                condition_number, ..
            } => write!(
                f,
                "degenerate design: transformation condition number {condition_number:e}"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
