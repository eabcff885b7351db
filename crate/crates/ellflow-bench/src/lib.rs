//! Shared fixtures for the benchmarks.

use ellflow::acceptance::two_block_profile;
use ellflow::{constant_profiles, sample_elliptic, CorrelationProfile, EllipticParams, SampledMatrix, C64};

/// Correlation of the elliptic fixtures.
pub const RHO: C64 = C64::new(0.5, 0.0);

/// Spectral parameters outside every fixture's spectrum.
pub fn outside_points() -> Vec<C64> {
    (0..16).map(|k| C64::from_polar(2.2, std::f64::consts::TAU * k as f64 / 16.0)).collect()
}

/// The constant profile of dimension `n`.
pub fn elliptic_profile(n: usize) -> CorrelationProfile {
    constant_profiles(n, RHO).expect("valid constant profile")
}

/// A profile with two classes of rows and correlated pairs.
pub fn block_profile(n: usize) -> CorrelationProfile {
    two_block_profile(n).expect("valid block profile")
}

/// One Gaussian elliptic matrix of dimension `n`.
pub fn elliptic_matrix(n: usize, seed: u64) -> SampledMatrix {
    sample_elliptic(&EllipticParams { n, rho: RHO, gaussian: true }, seed).expect("valid parameters")
}
