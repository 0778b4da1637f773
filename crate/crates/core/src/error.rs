//! Crate-wide error type.

use thiserror::Error;

/// Errors shared by all modules of the workbench.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Operand dimensions are inconsistent (grid vs symbol vs point).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A derivative oracle was asked for an order it cannot supply.
    #[error("unsupported derivative order: {0}")]
    UnsupportedDerivative(String),

    /// Input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A stated precondition fails on concrete probe points.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A fixed-point iteration left the contraction regime.
    /// Carries the residual trace up to the point of failure.
    #[error("iteration diverged after {} steps (last residuals {:?})", trace.len(), last(trace))]
    Divergence { trace: Vec<f64> },

    /// A matrix required to be invertible is numerically singular.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Requested frequency content exceeds what the grid resolves.
    #[error("aliasing: {0}")]
    Aliasing(String),

    /// Parameters outside the supported range of an exact routine.
    #[error("out of range: {0}")]
    Range(String),

    /// An input is too degenerate for the requested solve.
    #[error("conditioning failure: {0}")]
    Conditioning(String),

    /// A quadrature could not reach the requested accuracy.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// Config file parse problem (key, line, reason).
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem problem while emitting reports.
    #[error("io error: {0}")]
    Io(String),
}

fn last(trace: &[f64]) -> Vec<f64> {
    let n = trace.len();
    trace[n.saturating_sub(4)..].to_vec()
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
