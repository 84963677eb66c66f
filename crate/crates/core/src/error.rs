use thiserror::Error;

use crate::process::MethodKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time {t} is outside the scheduler domain {domain}")]
    Domain { t: f64, domain: &'static str },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{method} drift is singular at t = {t}")]
    Singularity { method: MethodKind, t: f64 },

    #[error("degenerate kernel at t = {t}: {what}")]
    Degenerate { t: f64, what: &'static str },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite loss at sample {index}")]
    NonFinite { index: usize },

    #[error("training diverged at step {step} (loss {loss})")]
    Divergence { step: usize, loss: f64 },

    #[error("quadrature on [{s}, {t}] did not converge within {budget} subintervals")]
    Quadrature { s: f64, t: f64, budget: usize },

    #[error("empty sample set")]
    Empty,

    #[error("path {path}, step {step}: {source}")]
    Step {
        path: usize,
        step: usize,
        source: Box<Error>,
    },

    #[error("malformed weights file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
