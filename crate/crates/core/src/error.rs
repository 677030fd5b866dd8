use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not Hermitian (‖A − A*‖ = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("ambient dimension mismatch: expected {expected}, found {found}")]
    AmbientMismatch { expected: usize, found: usize },

    #[error("degree {degree} is outside the truncation 0..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("subspace is not invariant (residual {residual:.3e})")]
    NotInvariant { residual: f64 },

    #[error("representation is not pure (‖Q‖ = {q_norm:.3e} after {k_used} steps)")]
    NotPure { q_norm: f64, k_used: usize },

    #[error("subspace is trivial")]
    TrivialSubspace,

    #[error("subspace is not wandering (residual {residual:.3e})")]
    NotWandering { residual: f64 },

    #[error("purity iteration did not converge after {k_used} steps (last step {step:.3e})")]
    NoConvergence { k_used: usize, step: f64 },

    #[error("denominator b[{index}] = {value} is not positive")]
    NonpositiveDenominator { index: usize, value: f64 },

    #[error("closed-form curvature requires a product system (X(n) = E^⊗n)")]
    NotProductSystem,

    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
