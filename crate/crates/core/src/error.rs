use thiserror::Error;

use crate::layout::PrimalDualPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid block index {index} (program has {blocks} blocks)")]
    InvalidBlock { index: usize, blocks: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A diagonal Hessian block failed the PSD test, so the objective is not
    /// convex in that block.
    #[error("objective is not convex in block {block}: smallest eigenvalue {min_eigenvalue:e}")]
    NotBlockConvex { block: usize, min_eigenvalue: f64 },

    #[error("non-finite value in block {block} during sweep {sweep}")]
    NonFinite { sweep: usize, block: usize },

    #[error("factorization of the block {block} system failed (matrix not positive definite)")]
    Factorization { block: usize },

    #[error("inner solver for block {block} did not terminate within {iterations} iterations")]
    InnerSolver { block: usize, iterations: usize },

    /// The best point found is returned so the caller can decide what to do.
    #[error("no convergence after {iterations} outer iterations (KKT residual {residual:e})")]
    NonConvergence {
        best: Box<PrimalDualPoint>,
        residual: f64,
        iterations: usize,
    },

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// True for errors that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::Factorization { .. }
            | Error::InnerSolver { .. }
            | Error::NonConvergence { .. } => true,
            Error::AtStep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
