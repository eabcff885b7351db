//! Error type shared by every module of the crate.

use num_complex::Complex64;
use thiserror::Error;

/// Everything that can go wrong in the numerical pipelines.
///
/// Variants are grouped by the caller's likely reaction: input problems
/// (`InvalidInput`, `InvalidProfile`, `Io`, `Format`) are the caller's fault;
/// the remaining variants report numerical situations that the theory
/// predicts or that the solvers could not resolve.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A correlation profile is structurally malformed or inconsistent.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// The radial continuation for 𝔟 entered the region where the stability
    /// gap is non-positive before reaching the requested point.
    #[error("ζ = {zeta} is not in the resolvent set reached from infinity (last valid point {last_valid})")]
    NonMember { zeta: Complex64, last_valid: Complex64 },

    /// Newton's method for the Dyson equation stalled: the Jacobian
    /// `1 − 𝔇_𝔟² T` lost invertibility along the path.
    #[error("Dyson Jacobian became singular near ζ = {zeta}")]
    SingularJacobian { zeta: Complex64 },

    /// `1 + (ζ + T𝔟)𝔟 = 0` has no well-defined branch on the cut segment.
    #[error("ζ = {zeta} lies on the branch cut of the closed-form solution")]
    BranchAmbiguity { zeta: Complex64 },

    /// An iterative method ran out of iterations.
    #[error("{what} did not converge (final residual {residual:.3e})")]
    NoConvergence { what: &'static str, residual: f64 },

    /// The kernel matrix `𝔇⁻¹ − S` is numerically singular.
    #[error("kernel matrix is near singular (smallest singular value {min_sing:.3e})")]
    NearSingular { min_sing: f64 },

    /// `𝔟₁𝔟̄₂` is numerically equal to one in the closed-form kernel.
    #[error("kernel pole contact: |1 − 𝔟₁𝔟̄₂| = {gap:.3e}")]
    PoleContact { gap: f64 },

    /// The operation is only defined for entry-wise nonnegative `T`.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// The Perron–Frobenius machinery needs a primitive matrix.
    #[error("matrix is not primitive")]
    NotPrimitive,

    /// The real-axis root search for ζ* could not bracket a sign change.
    #[error("could not bracket ζ*: {0}")]
    BracketFailure(String),

    /// A quantity would leave the range of `f64`.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A LAPACK routine reported failure.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// File-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file was readable but its content is malformed.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by bad user input rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::InvalidProfile(_)
                | Error::Io(_)
                | Error::Format(_)
                | Error::NotApplicable(_)
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
