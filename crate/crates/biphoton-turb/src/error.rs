//! Crate-wide error type.

use crate::kernel::Var;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated a precondition (non-positive length, negative strength, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A Gaussian integral does not converge: the quadratic form over the
    /// variable being integrated has a non-positive-definite real part.
    #[error("kernel not integrable over {variable}: Re(pivot) = {pivot:.3e} is not positive")]
    NotIntegrable { variable: Var, pivot: f64 },

    /// The kernel trace integral diverges (degenerate restricted form).
    #[error("trace diverges: restricted quadratic form is singular or not positive definite")]
    DivergentTrace,

    /// All sixteen qubit projections vanished; the state cannot be normalized.
    #[error("degenerate projection: qubit-subspace trace vanishes")]
    DegenerateProjection,

    /// The structure-constant quadrature window is too narrow.
    #[error("structure-constant quadrature did not converge: residual estimate {residual:.3e}")]
    Convergence { residual: f64 },

    /// A series-based derivative extraction was asked for more than its order allows.
    #[error("series order {order} cannot reach total degree {needed}")]
    Capacity { order: usize, needed: usize },

    /// A density matrix failed a Hermiticity / positivity / trace check.
    #[error("invalid qubit state: {0}")]
    InvalidState(String),

    /// Quadrature domain check failed: the integrand is not negligible at the boundary.
    #[error("quadrature domain too small: boundary/peak magnitude {ratio:.3e} exceeds 1e-12")]
    InsufficientDomain { ratio: f64 },

    /// Finite-difference step too small: cancellation dominates the stencil.
    #[error("finite-difference precision failure: extrapolation residual {residual:.3e}")]
    Precision { residual: f64 },

    /// Malformed sweep configuration or serialized record.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
