use thiserror::Error;

use crate::problem::PrimalDualPair;

/// Errors surfaced by problem evaluators, oracles and drivers.
#[derive(Debug, Error)]
pub enum SspError {
    /// Invalid argument or infeasible point.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation needs a capability (constant, evaluator, geometry)
    /// the problem does not provide.
    #[error("capability error: {0}")]
    Capability(String),

    /// An iterative solver ran out of its iteration budget. Carries the
    /// last iterate so callers can inspect or resume.
    #[error("solver did not converge: residual {residual:.3e} after {iters} iterations (tol {tol:.3e})")]
    NonConvergence {
        iters: usize,
        residual: f64,
        tol: f64,
        last: Box<PrimalDualPair>,
    },

    /// An internal invariant that the algorithm guarantees was violated.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SspError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SspError::Domain(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        SspError::Capability(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SspError>;
