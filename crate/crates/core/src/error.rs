use thiserror::Error;

use crate::connection::AffineCounterexample;
use crate::exprlang::{EvalError, ParseError};
use crate::geometry::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("invalid bundle spec: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Violation>),
    #[error("not in the prolongation: |dx - rho(x)v| = {residual:e} exceeds {tol:e}")]
    NotInProlongation { residual: f64, tol: f64 },
    #[error("base points differ")]
    BasePointMismatch,
    #[error("connection is not affine: {0}")]
    NotAffine(Box<AffineCounterexample>),
    #[error("blow-up detected at t = {t_star}")]
    BlowUp { t_star: f64 },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn expect_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}
