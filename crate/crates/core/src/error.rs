use alloc::string::String;
use core::fmt;

use crate::lp::Status;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    InvalidArgument(String),
    /// The LP engine stopped without an optimal solution.
    Solver {
        status: Status,
        iterations: usize,
        detail: String,
    },
    /// An iterative method ran out of iterations before meeting its tolerances.
    NonConvergence {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Solver {
                status,
                iterations,
                detail,
            } => write!(
                f,
                "solver stopped with status {status:?} after {iterations} iterations: {detail}"
            ),
            Error::NonConvergence {
                iterations,
                primal_residual,
                dual_residual,
            } => write!(
                f,
                "no convergence after {iterations} iterations \
                 (primal residual {primal_residual:e}, dual residual {dual_residual:e})"
            ),
        }
    }
}

impl core::error::Error for Error {}
