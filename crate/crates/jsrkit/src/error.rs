use thiserror::Error;

use crate::matrix::Matrix;
use crate::norms::BarabanovCertificate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver did not converge on a {}x{} matrix", .matrix.rows(), .matrix.cols())]
    NonConvergence { matrix: Box<Matrix> },

    #[error("resource cap exceeded: requested {requested}, cap {cap}")]
    Resource { requested: u128, cap: u128 },

    #[error("inconsistent result: {0}")]
    Inconsistent(String),

    #[error("symbol {symbol} outside alphabet 1..={alphabet}")]
    IndexOutOfRange { symbol: usize, alphabet: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("subadditivity violated at split (n={n}, m={m})")]
    SubadditivityViolation { n: usize, m: usize },

    #[error("numerically ambiguous rank: residual {residual:e} lies between tol {tol:e} and its square root; adjust tol")]
    NumericallyAmbiguous { residual: f64, tol: f64 },

    #[error(
        "iteration did not converge after {iterations} iterations (last change {last_change:e})"
    )]
    IterationLimit { iterations: usize, last_change: f64 },

    #[error("Barabanov iteration did not converge; best iterate has residual {:e}", .best.residual)]
    BarabanovNonConvergence { best: Box<BarabanovCertificate> },
}

impl Error {
    /// Coarse classification used by front ends to choose an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_)
            | Error::Domain(_)
            | Error::IndexOutOfRange { .. }
            | Error::LengthMismatch { .. }
            | Error::SubadditivityViolation { .. } => ErrorKind::Input,
            Error::Resource { .. } => ErrorKind::Resource,
            Error::NonConvergence { .. }
            | Error::Inconsistent(_)
            | Error::NumericallyAmbiguous { .. }
            | Error::IterationLimit { .. }
            | Error::BarabanovNonConvergence { .. } => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Resource,
    Numeric,
}

pub type Result<T> = std::result::Result<T, Error>;
