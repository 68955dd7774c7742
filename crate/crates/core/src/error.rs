use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module.
///
/// The variants are coarse on purpose: the CLI maps them onto process exit
/// codes, and each message carries the offending quantities.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Operands built over different CCR structures, or a singular CCR matrix
    /// where an invertible one is required.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    /// Input violates a precondition (self-adjointness, symmetry, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The quantum covariance Σ + iΘ/2 is not positive (semi-)definite enough.
    #[error("admissibility error: {0}")]
    Admissibility(String),

    /// A drift matrix that should be Hurwitz is not.
    #[error("stability error: {0}")]
    Stability(String),

    /// The quadratic-fit normal equations are singular.
    #[error("degenerate fit: {0}")]
    Degeneracy(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(
        "no convergence after {iterations} iterations \
         (mean residual {mean_residual:e}, lyapunov residual {lyapunov_residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        mean_residual: f64,
        lyapunov_residual: f64,
    },

    /// A post-condition that holds analytically failed numerically.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("out of scope: {0}")]
    OutOfScope(String),
}
