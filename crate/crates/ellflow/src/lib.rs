//! Deterministic large-N spectral theory of elliptic and elliptic-type
//! non-Hermitian random matrices, and the long-time decay of the linear
//! system `u̇ = −u + gXu`.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`ensemble`] — correlation profiles `(S, T)`, validation, samplers, I/O;
//! * [`dyson`] — the vector Dyson equation for 𝔟(ζ), the 2×2 block MDE and
//!   the stability gap Δ_ζ;
//! * [`geometry`] — the elliptic domain, the rightmost point ζ* and traced
//!   level sets of Δ_ζ;
//! * [`kernel`] — the two-resolvent kernel K(ζ₁, ζ₂) and the singularity data
//!   at ζ* that fix the decay amplitude A(S, T);
//! * [`quadrature`] — contours and the double-contour evaluation of
//!   `𝔼‖u_t‖² = tr_N e^{t(gX*−1)}e^{t(gX−1)}`;
//! * [`bessel`] — modified Bessel functions and the elliptic closed forms;
//! * [`montecarlo`] — finite-N simulation of the same quantities;
//! * [`acceptance`] — the end-to-end consistency checks shared by the test
//!   suite and the command-line `verify` command.

pub mod acceptance;
pub mod bessel;
pub mod dyson;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod montecarlo;
pub mod quadrature;
pub mod reduce;

pub use dyson::{
    db_dzeta, solve_b, solve_b_elliptic, solve_mde_2x2, spectral_gap, MdeSolution2x2, PseudoResolvent,
};
pub use ensemble::{
    constant_profiles, sample_elliptic, sample_elliptic_type, validate_profile, CorrelationProfile,
    EllipticParams, SampledMatrix, ValidationReport,
};
pub use error::{Error, Result};
pub use geometry::{ellipse_boundary, find_zeta_star, trace_level_set, DomainKind, SpectralDomain};
pub use kernel::{
    coefficient_a, kernel_elliptic, kernel_general, kernel_independent, perron_pair, KernelEval,
    SingularityData,
};
pub use linalg::C64;
pub use montecarlo::{empirical_spectrum, evolve_norm, run_study, McResult, McSource, McStudy};
pub use quadrature::{
    circle_contour, decay_curve, dilated_ellipse_contour, trace_f, trace_fg, Contour, ContourConfig,
    DecayCurve, Orientation,
};
