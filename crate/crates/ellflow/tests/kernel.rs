//! The two-resolvent kernel in its three forms, Perron pairs and the
//! singularity data at ζ*.

use approx::assert_relative_eq;
use ellflow::acceptance::two_block_profile;
use ellflow::kernel::tracked_eigenvalue;
use ellflow::{
    coefficient_a, constant_profiles, kernel_elliptic, kernel_general, kernel_independent, perron_pair,
    CorrelationProfile, Error, SingularityData, C64,
};
use ndarray::Array2;
use ndarray_linalg::Eig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Random points outside the dilated ellipse of a real ρ.
fn outside(rng: &mut ChaCha8Rng, rho: f64) -> C64 {
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let scale: f64 = rng.random_range(1.15..3.0);
    c(scale * (1.0 + rho) * phi.cos(), scale * (1.0 - rho + 0.2) * phi.sin())
}

#[test]
fn independent_constant_value() {
    let p = constant_profiles(7, c(0.0, 0.0)).unwrap();
    let k = kernel_general(c(2.0, 0.0), c(2.0, 0.0), &p).unwrap();
    assert_relative_eq!(k.value.re, 1.0 / 3.0, max_relative = 1e-13);
    assert!(k.value.im.abs() < 1e-15);
    assert!(k.min_sing > 0.0);
}

#[test]
fn kernel_decays_at_infinity() {
    let p = constant_profiles(4, c(0.3, 0.0)).unwrap();
    let z2 = c(2.0, 1.0);
    let mut prev = f64::INFINITY;
    for r in [1e2, 1e3, 1e4, 1e5] {
        let k = kernel_general(c(r, 0.0), z2, &p).unwrap().value;
        let scaled = k.norm() * r;
        assert!(k.norm() < prev);
        prev = k.norm();
        // 𝔟₁ ≈ −1/ζ₁, so K ≈ 𝔟̄₂·(−1/ζ₁)/(1 + 𝔟̄₂/ζ₁) and |ζ₁K| → |𝔟₂|.
        let b2 = ellflow::solve_b_elliptic(z2, c(0.3, 0.0)).unwrap();
        assert!((scaled - b2.norm()).abs() < 2.0 / r);
    }
}

#[test]
fn cross_form_equality_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rho = 0.5;
    let p = constant_profiles(6, c(rho, 0.0)).unwrap();
    for _ in 0..50 {
        let (z1, z2) = (outside(&mut rng, rho), outside(&mut rng, rho));
        let g = kernel_general(z1, z2, &p).unwrap().value;
        let e = kernel_elliptic(z1, z2, c(rho, 0.0)).unwrap();
        assert!((g - e).norm() <= 1e-10 * e.norm().max(1.0), "{z1}, {z2}: {g} vs {e}");
    }

    let n = 6;
    let s = Array2::from_shape_fn((n, n), |_| rng.random_range(0.05..0.3));
    let q = CorrelationProfile::new(s.clone(), Array2::zeros((n, n))).unwrap();
    let (_, _, r) = perron_pair(&s).unwrap();
    for _ in 0..50 {
        let z1 = C64::from_polar(r.sqrt() * rng.random_range(1.2..3.0), rng.random_range(0.0..6.3));
        let z2 = C64::from_polar(r.sqrt() * rng.random_range(1.2..3.0), rng.random_range(0.0..6.3));
        let g = kernel_general(z1, z2, &q).unwrap().value;
        let i = kernel_independent(z1, z2, &s).unwrap();
        assert!((g - i).norm() <= 1e-12 * i.norm().max(1.0));
    }
}

#[test]
fn hermitian_symmetry_of_all_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let p = two_block_profile(12).unwrap();
    let s = p.s.clone();
    for _ in 0..20 {
        let (z1, z2) = (outside(&mut rng, 0.4), outside(&mut rng, 0.4));
        let a = kernel_general(z1, z2, &p).unwrap().value;
        let b = kernel_general(z2, z1, &p).unwrap().value;
        assert!((a - b.conj()).norm() <= 1e-13 * a.norm().max(1.0));
        let a = kernel_elliptic(z1, z2, c(0.2, 0.3)).unwrap();
        let b = kernel_elliptic(z2, z1, c(0.2, 0.3)).unwrap();
        assert!((a - b.conj()).norm() <= 1e-14 * a.norm().max(1.0));
        let a = kernel_independent(z1 * 2.0, z2 * 2.0, &s).unwrap();
        let b = kernel_independent(z2 * 2.0, z1 * 2.0, &s).unwrap();
        assert!((a - b.conj()).norm() <= 1e-14 * a.norm().max(1.0));
    }
}

#[test]
fn elliptic_form_limits() {
    for (z1, z2) in [(c(2.0, 0.0), c(3.0, 1.0)), (c(-1.5, 2.0), c(0.5, -1.2))] {
        let k = kernel_elliptic(z1, z2, c(0.0, 0.0)).unwrap();
        assert!((k - 1.0 / (z1 * z2.conj() - 1.0)).norm() < 1e-15);
    }
    let rho = c(0.5, 0.0);
    let mut prev = 0.0;
    for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
        let k = kernel_elliptic(c(1.5 + eps, 0.0), c(1.5 + eps, 0.0), rho).unwrap();
        assert!(k.re > prev && k.im.abs() < 1e-12 * k.re);
        prev = k.re;
    }
    assert!(prev > 1e2);
    assert!(matches!(kernel_elliptic(c(1.5, 0.0), c(1.5, 0.0), rho), Err(Error::PoleContact { .. })));
}

#[test]
fn independent_form_on_block_diagonal_variances() {
    // Classes of sizes 3 and 5 with s = 0.2 and 0.1 inside each block:
    // the reduced system is diagonal, ŷ_c = 1/(w − s_cc·n_c).
    let s = Array2::from_shape_fn((8, 8), |(i, j)| match (i < 3, j < 3) {
        (true, true) => 0.2,
        (false, false) => 0.1,
        _ => 0.0,
    });
    for (z1, z2) in [(c(1.0, 0.5), c(1.2, -0.3)), (c(-2.0, 0.0), c(0.0, 1.5))] {
        let w = z1 * z2.conj();
        let expected = (3.0 / (w - 0.6) + 5.0 / (w - 0.5)) / 8.0;
        let got = kernel_independent(z1, z2, &s).unwrap();
        assert!((got - expected).norm() < 1e-14 * expected.norm());
    }
    assert!(kernel_independent(c(0.5, 0.0), c(0.5, 0.0), &s).is_err());
}

#[test]
fn general_form_requires_membership() {
    let p = constant_profiles(4, c(0.5, 0.0)).unwrap();
    assert!(matches!(kernel_general(c(0.5, 0.1), c(3.0, 0.0), &p), Err(Error::NonMember { .. })));
}

#[test]
fn perron_pairs() {
    let (vl, vr, r) = perron_pair(&Array2::from_elem((6, 6), 1.0 / 6.0)).unwrap();
    assert_relative_eq!(r, 1.0, max_relative = 1e-13);
    assert!(vl.iter().chain(vr.iter()).all(|v| (v - 1.0).abs() < 1e-12));

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let m = Array2::from_shape_fn((50, 50), |_| rng.random_range(0.01..1.0));
    let (vl, vr, r) = perron_pair(&m).unwrap();
    let (ev, _) = m.eig().unwrap();
    let dense = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert_relative_eq!(r, dense, max_relative = 1e-8);
    assert!(vl.iter().chain(vr.iter()).all(|v| *v > 0.0));
    assert_relative_eq!(vl.dot(&vr) / 50.0, 1.0, max_relative = 1e-12);
    let right = m.dot(&vr) - &vr * r;
    let left = m.t().dot(&vl) - &vl * r;
    assert!(right.iter().chain(left.iter()).all(|x| x.abs() < 1e-8 * r));

    // Comparability with ε = min m / max m for a strictly positive matrix.
    let eps = m.iter().cloned().fold(f64::INFINITY, f64::min) / m.iter().cloned().fold(0.0, f64::max);
    for v in [&vl, &vr] {
        let mean = v.mean().unwrap();
        assert!(v.iter().all(|x| eps * mean <= *x && *x <= mean / eps));
    }

    let swap = Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    assert!(matches!(perron_pair(&swap), Err(Error::NotPrimitive)));
}

#[test]
fn coefficient_examples() {
    let sd = coefficient_a(&constant_profiles(5, c(0.0, 0.0)).unwrap(), 1e-13).unwrap();
    assert_relative_eq!(sd.a_coeff, 1.0 / 2f64.sqrt(), max_relative = 1e-8);
    let sd = coefficient_a(&constant_profiles(5, c(0.5, 0.0)).unwrap(), 1e-13).unwrap();
    assert_relative_eq!(sd.a_coeff, 0.25 / 3f64.sqrt(), max_relative = 1e-8);
    assert_relative_eq!(sd.zeta_star, 1.5, max_relative = 1e-10);
    assert!(sd.f_norm <= 0.5 + 1e-12);
}

fn check_invariants(sd: &SingularityData, rho: f64) {
    assert!(sd.v_l.iter().chain(sd.v_r.iter()).all(|v| *v > 0.0));
    let n = sd.v_l.len() as f64;
    let inner: f64 = sd.v_l.iter().zip(&sd.v_r).map(|(a, b)| a * b).sum::<f64>() / n;
    assert_relative_eq!(inner, 1.0, max_relative = 1e-12);
    assert!(sd.b_star.iter().all(|b| *b < 0.0));
    assert!(sd.d2_lambda > 0.0 && sd.d2z2 > 0.0);
    assert_eq!(sd.dz2, -1.0);
    assert!(sd.a_coeff > 0.01 && sd.a_coeff < 100.0);
    assert!(sd.a_discrepancy < 1e-10, "discrepancy {}", sd.a_discrepancy);
    assert!(sd.f_norm <= rho + 1e-12, "‖F‖ = {}", sd.f_norm);
}

#[test]
fn block_profile_singularity_data() {
    let p = two_block_profile(40).unwrap();
    let sd = coefficient_a(&p, 1e-13).unwrap();
    check_invariants(&sd, p.tightest_rho());
    let zs = c(sd.zeta_star, 0.0);
    assert!(tracked_eigenvalue(&p, &sd, zs, zs).unwrap().norm() < 1e-12);

    // ∂̄₂λ: moving ζ₂ along the real axis moves ζ̄₂ by the same amount.
    let h = 1e-5;
    let lp = tracked_eigenvalue(&p, &sd, zs, zs + h).unwrap();
    let lm = tracked_eigenvalue(&p, &sd, zs, zs - h).unwrap();
    let fd = (lp - lm).re / (2.0 * h);
    assert!((fd - sd.d2_lambda).abs() <= 1e-6 * sd.d2_lambda, "{fd} vs {}", sd.d2_lambda);
}

/// The real ζ̄₂ with `λ(ζ* + s, ζ̄₂) = 0`, by the secant method.
fn partner(p: &CorrelationProfile, sd: &SingularityData, s: f64) -> f64 {
    let z1 = c(sd.zeta_star + s, 0.0);
    let lam = |w: f64| tracked_eigenvalue(p, sd, z1, c(w, 0.0)).unwrap().re;
    let (mut w0, mut w1) = (sd.zeta_star - s, sd.zeta_star - s + 1e-7);
    let (mut f0, mut f1) = (lam(w0), lam(w1));
    for _ in 0..60 {
        if f1 == f0 || f1 == 0.0 {
            break;
        }
        let w2 = w1 - f1 * (w1 - w0) / (f1 - f0);
        (w0, f0) = (w1, f1);
        w1 = w2;
        f1 = lam(w1);
        if (w1 - w0).abs() <= 1e-16 * w1.abs() {
            break;
        }
    }
    w1
}

#[test]
fn implicit_solution_derivatives() {
    let p = two_block_profile(40).unwrap();
    let sd = coefficient_a(&p, 1e-13).unwrap();
    let s = 1e-4;
    let (wp, wm) = (partner(&p, &sd, s), partner(&p, &sd, -s));
    let first = (wp - wm) / (2.0 * s);
    assert!((first + 1.0).abs() < 1e-6, "∂z̄₂ ≈ {first}");

    // Richardson-extrapolated second difference.
    let second = |s: f64| (partner(&p, &sd, s) + partner(&p, &sd, -s) - 2.0 * sd.zeta_star) / (s * s);
    let big = 4e-3;
    let d2 = (4.0 * second(big / 2.0) - second(big)) / 3.0;
    assert!((d2 - sd.d2z2).abs() <= 1e-5 * sd.d2z2, "{d2} vs {}", sd.d2z2);
}

#[test]
fn coefficient_requires_nonnegative_correlations() {
    let p = constant_profiles(4, c(0.0, 0.3)).unwrap();
    assert!(matches!(coefficient_a(&p, 1e-12), Err(Error::NotApplicable(_))));
}
