//! Randomized properties over the parameter space.

use ellflow::bessel::{bessel_i, decay_series};
use ellflow::ensemble::pair_cholesky;
use ellflow::geometry::inside_ellipse;
use ellflow::{constant_profiles, ellipse_boundary, kernel_elliptic, solve_b, solve_b_elliptic, CorrelationProfile, C64};
use proptest::prelude::*;

fn complex_in_disk(radius: f64) -> impl Strategy<Value = C64> {
    (0.0..radius, 0.0..std::f64::consts::TAU).prop_map(|(r, phi)| C64::from_polar(r, phi))
}

/// A point outside `E_ρ`: a boundary point pushed outward by `scale > 1`.
fn outside(rho: C64, phi: f64, scale: f64) -> C64 {
    let half = C64::from_polar(1.0, rho.arg() / 2.0);
    half * (C64::from_polar(rho.norm(), phi) + C64::from_polar(1.0, -phi)) * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_solves_the_quadratic(rho in complex_in_disk(0.95), phi in 0.0..6.28f64, scale in 1.02..5.0f64) {
        let z = outside(rho, phi, scale);
        let b = solve_b_elliptic(z, rho).unwrap();
        prop_assert!((rho * b * b + z * b + 1.0).norm() < 1e-13);
        // The branch analytic at infinity stays inside the unit disk off E_ρ.
        prop_assert!(b.norm() < 1.0);
    }

    #[test]
    fn generic_solver_matches_closed_form(rho in complex_in_disk(0.8), phi in 0.0..6.28f64, scale in 1.05..4.0f64) {
        let z = outside(rho, phi, scale);
        prop_assume!(!inside_ellipse(z, rho));
        let p = constant_profiles(3, rho).unwrap();
        let pr = solve_b(z, &p, 1e-13).unwrap();
        let e = solve_b_elliptic(z, rho).unwrap();
        prop_assert!(pr.b.iter().all(|b| (b - e).norm() < 1e-10));
        prop_assert!(pr.residual <= 1e-13);
    }

    #[test]
    fn elliptic_kernel_is_hermitian(rho in complex_in_disk(0.9), p1 in 0.0..6.28f64, p2 in 0.0..6.28f64,
                                     s1 in 1.05..3.0f64, s2 in 1.05..3.0f64) {
        let (z1, z2) = (outside(rho, p1, s1), outside(rho, p2, s2));
        let a = kernel_elliptic(z1, z2, rho).unwrap();
        let b = kernel_elliptic(z2, z1, rho).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-13 * a.norm().max(1.0));
        let diag = kernel_elliptic(z1, z1, rho).unwrap();
        prop_assert!(diag.re > 0.0 && diag.im.abs() <= 1e-13 * diag.re);
    }

    #[test]
    fn bessel_recurrence(re in -30.0..30.0f64, im in -30.0..30.0f64, k in 1i64..12) {
        let z = C64::new(re, im);
        prop_assume!(z.norm() > 0.5);
        let lhs = bessel_i(k - 1, z).unwrap() - bessel_i(k + 1, z).unwrap();
        let rhs = bessel_i(k, z).unwrap() * (2.0 * k as f64) / z;
        let scale = bessel_i(k - 1, z).unwrap().norm().max(bessel_i(k + 1, z).unwrap().norm());
        prop_assert!((lhs - rhs).norm() <= 1e-11 * scale);
    }

    #[test]
    fn decay_series_is_a_positive_contraction_below_criticality(rho in complex_in_disk(0.9), frac in 0.1..1.0f64, t in 0.0..40.0f64) {
        let g = frac / (1.0 + rho.norm());
        let v = decay_series(rho, g, t, 1e-14).unwrap().value;
        prop_assert!(v > 0.0);
        prop_assert!(v <= 1.0 + 1e-12);
    }

    #[test]
    fn pair_factor_is_exact(sij in 0.01..2.0f64, sji in 0.01..2.0f64, r in 0.0..1.0f64, phi in 0.0..6.28f64) {
        let t = C64::from_polar(r * (sij * sji).sqrt(), phi);
        let (l11, l21, l22) = pair_cholesky(sij, sji, t).unwrap();
        prop_assert!((l11 * l11 - sij).abs() <= 1e-14 * sij);
        prop_assert!((l21.norm_sqr() + l22 * l22 - sji).abs() <= 1e-14 * sji.max(sij));
        prop_assert!((l21.conj() * l11 - t).norm() <= 1e-14 * (sij * sji).sqrt());
    }

    #[test]
    fn profiles_round_trip_through_json(n in 1usize..7, rho in complex_in_disk(0.99)) {
        let p = constant_profiles(n, rho).unwrap();
        prop_assert_eq!(CorrelationProfile::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn ellipse_boundary_is_on_the_boundary(rho in complex_in_disk(0.99), k in 3usize..100) {
        let d = ellipse_boundary(rho, k).unwrap();
        for z in &d.boundary {
            prop_assert!(!inside_ellipse(*z * 1.000001, rho));
            prop_assert!(inside_ellipse(*z * 0.999999, rho));
        }
    }
}
