//! Bessel functions and the elliptic decay closed forms.
//!
//! Reference values were computed once with 40-digit arbitrary-precision
//! arithmetic (mpmath `besseli` and a direct 400-term sum of the decay
//! series) and are frozen here.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use ellflow::bessel::{
    bessel_i, bessel_i_scaled, critical_coupling, decay_asymptotic, decay_full_lattice, decay_series, graf_check,
    negative_tail_bound,
};
use ellflow::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn bessel_values_match_high_precision_reference() {
    let cases: [(i64, C64, C64); 8] = [
        (0, c(1.0, 0.0), c(1.2660658777520083356, 0.0)),
        (3, c(1.7, 0.3), c(0.10611820529358416503, 0.070385851776283562217)),
        (5, c(25.0, 0.0), c(3472466208.7419167348, 0.0)),
        (2, c(-4.0, 12.0), c(2.9383484407036991104, 5.0823127936837303138)),
        (10, c(30.0, 40.0), c(-291083252070.71580423, 158189564687.32562086)),
        (1, c(0.0, 50.0), c(0.0, -0.097511828125175137661)),
        (40, c(8.0, -3.0), c(-1.3900344115335590335e-23, -2.5202308645961131218e-23)),
        (0, c(2.0, 0.0), c(2.2795853023360672674, 0.0)),
    ];
    for (k, z, expected) in cases {
        let got = bessel_i(k, z).unwrap();
        assert!((got - expected).norm() <= 1e-12 * expected.norm(), "I_{k}({z}) = {got}, expected {expected}");
    }
}

#[test]
fn scaled_values_beyond_the_exponent_range() {
    let cases: [(i64, C64, C64); 4] = [
        (0, c(200.0, 0.0), c(0.02822715994911191567, 0.0)),
        (3, c(650.0, 30.0), c(0.0020464755337308994352, -0.015399324821568478022)),
        (7, c(-900.0, -40.0), c(0.00842372557849929032, -0.0098185237770444803271)),
        (25, c(1200.0, 800.0), c(-0.0025158312931307318478, 0.008403815980899603078)),
    ];
    for (k, z, expected) in cases {
        let got = bessel_i_scaled(k, z);
        assert!((got - expected).norm() <= 1e-11 * expected.norm(), "I_{k}({z})e^(-|Re z|) = {got}");
    }
}

#[test]
fn small_argument_values() {
    assert_eq!(bessel_i(0, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
    for k in 1..6 {
        assert_eq!(bessel_i(k, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
    }
}

#[test]
fn conjugation_and_negative_order() {
    for &z in &[c(1.7, 0.3), c(-3.0, 7.5), c(12.0, -20.0)] {
        for k in 0..8 {
            let a = bessel_i(k, z.conj()).unwrap();
            let b = bessel_i(k, z).unwrap().conj();
            assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300));
            assert_eq!(bessel_i(-k, z).unwrap(), bessel_i(k, z).unwrap());
        }
    }
}

#[test]
fn three_term_recurrence() {
    let z = c(1.7, 0.3);
    for j in 1..=10 {
        let lhs = bessel_i(j - 1, z).unwrap() - bessel_i(j + 1, z).unwrap();
        let rhs = bessel_i(j, z).unwrap() * (2.0 * j as f64) / z;
        assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1e-300), "j = {j}");
    }
}

#[test]
fn large_argument_asymptotics() {
    // I_m(x)√(2πx)e^{−x} = 1 − (4m²−1)/(8x) + O(x⁻²); at x = 500 the
    // first-order term is 2.5e-4 for m = 0 but 3.75e-3 for m = 2.
    let x = 500.0;
    let scaled = |m: i64| bessel_i_scaled(m, c(x, 0.0)).re * (2.0 * PI * x).sqrt();
    assert!((scaled(0) - 1.0).abs() < 1e-3);
    for m in [0i64, 2] {
        let mu = 4.0 * (m * m) as f64;
        let two_term = 1.0 - (mu - 1.0) / (8.0 * x);
        assert!((scaled(m) - two_term).abs() < 1e-5, "m = {m}: {}", scaled(m));
    }
}

#[test]
fn overflow_is_flagged() {
    assert!(bessel_i(0, c(701.0, 0.0)).is_err());
    assert!(bessel_i(0, c(-701.0, 3.0)).is_err());
}

#[test]
fn decay_series_matches_direct_summation() {
    let cases = [
        (c(0.5, 0.0), 2.0 / 3.0, 3.0, 0.086213915844152122449),
        (c(0.3, 0.2), 0.7, 2.5, 0.087953036606246184681),
        (c(0.2, 0.0), 1.0 / 1.2, 10.0, 0.060959088217375932833),
        (c(0.0, 0.4), 0.9, 4.0, 0.084015319489983311968),
    ];
    for (rho, g, t, expected) in cases {
        let r = decay_series(rho, g, t, 1e-15).unwrap();
        assert_relative_eq!(r.value, expected, max_relative = 1e-12);
        assert!(r.truncation_bound <= 1e-15);
        assert!(r.value >= 0.0);
    }
}

#[test]
fn decay_series_small_time_limit() {
    let r = decay_series(c(0.5, 0.0), 2.0 / 3.0, 1e-6, 1e-15).unwrap();
    assert!((r.value - 1.0).abs() < 1e-5);
    assert_eq!(decay_series(c(0.5, 0.0), 2.0 / 3.0, 0.0, 1e-15).unwrap().value, 1.0);
}

#[test]
fn decay_series_is_branch_independent() {
    // Rotating ρ by a full turn flips the principal √ρ; |I_j|² is unaffected.
    let rho = c(-0.3, 1e-300);
    let flipped = c(-0.3, -1e-300);
    let a = decay_series(rho, 0.8, 5.0, 1e-15).unwrap().value;
    let b = decay_series(flipped, 0.8, 5.0, 1e-15).unwrap().value;
    assert_relative_eq!(a, b, max_relative = 1e-13);
}

#[test]
fn asymptotic_coefficient_and_critical_form() {
    let rho = c(0.5, 0.0);
    let g = critical_coupling(rho);
    assert_relative_eq!(g, 1.0 / 1.5, max_relative = 1e-15);
    for t in [1.0, 10.0, 100.0] {
        // At critical coupling the exponential is one: coeff/(2√(πt)).
        let expected = 0.25 / (2.0 * (PI * t).sqrt());
        assert_relative_eq!(decay_asymptotic(rho, g, t), expected, max_relative = 1e-13);
    }
    // ρ = 0 with g = 1: the independent t^{-1/2} law with coefficient one.
    let t = 50.0;
    assert_relative_eq!(decay_asymptotic(c(0.0, 0.0), 1.0, t), 1.0 / (2.0 * (PI * t).sqrt()), max_relative = 1e-13);
}

#[test]
fn series_approaches_asymptote_with_first_order_correction() {
    // The ratio series/asymptotic tends to one like 1 + c/t: its deviation
    // shrinks by about half each time t doubles.
    let rho = c(0.5, 0.0);
    let g = critical_coupling(rho);
    let dev = |t: f64| {
        let s = decay_series(rho, g, t, 1e-15).unwrap();
        (s.log_value - ellflow::bessel::decay_asymptotic_ln(rho, g, t)).exp() - 1.0
    };
    let (d1, d2, d3) = (dev(200.0), dev(400.0), dev(800.0));
    assert!(d1 > d2 && d2 > d3 && d3 > 0.0);
    assert!((d1 / d2 - 2.0).abs() < 0.1 && (d2 / d3 - 2.0).abs() < 0.1, "{d1} {d2} {d3}");
}

#[test]
fn graf_special_cases() {
    let (lhs, rhs) = graf_check(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), 0, 60).unwrap();
    assert!((lhs - c(2.2795853023360672674, 0.0)).norm() < 1e-13);
    assert!((lhs - rhs).norm() < 1e-13);
    let (lhs, rhs) = graf_check(c(1.0, 0.0), c(2.0, 0.0), c(1.5, 0.0), 0, 60).unwrap();
    assert!((lhs - rhs).norm() < 1e-10);
    let x = c(1.3, -0.4);
    let (lhs, rhs) = graf_check(x, c(0.0, 0.0), c(1e6, 0.0), 2, 30).unwrap();
    let direct = bessel_i(2, x).unwrap();
    assert!((lhs - direct).norm() < 1e-12 && (rhs - direct).norm() < 1e-12);
}

/// Brute-force sum of the negatively indexed lattice terms.
fn negative_tail(rho: C64, g: f64, t: f64) -> f64 {
    let arg = rho.sqrt() * (2.0 * t * g);
    (1..=50)
        .map(|k| {
            let j = -(k as i64);
            let term = bessel_i(j, arg).unwrap() * (j as f64 / (t * g));
            rho.norm().powi(k) * term.norm_sqr()
        })
        .sum()
}

#[test]
fn negative_tail_bound_holds() {
    let rho = c(0.5, 0.0);
    let g = 2.0 / 3.0;
    let t = 20.0;
    assert!(negative_tail(rho, g, t) <= negative_tail_bound(rho, g, t));
    let mut last = f64::INFINITY;
    for t in [20.0, 40.0, 80.0] {
        // The bound carries no e^{−2t}; compare like with like.
        let ratio = (negative_tail_bound(rho, g, t).ln() - 2.0 * t - decay_asymptotic(rho, g, t).ln()).exp();
        assert!(ratio < last);
        last = ratio;
    }
    assert!(negative_tail_bound(c(1e-12, 0.0), g, t) < 1e-10);
}

#[test]
fn full_lattice_identity() {
    for (rho, g, t) in [(c(0.5, 0.0), 2.0 / 3.0, 3.0), (c(0.3, 0.2), 0.7, 2.5), (c(0.0, 0.4), 0.9, 4.0)] {
        let series = decay_series(rho, g, t, 1e-16).unwrap().value;
        let tail = (-2.0 * t).exp() * negative_tail(rho, g, t);
        let closed = decay_full_lattice(rho, g, t);
        assert_relative_eq!(series + tail, closed, max_relative = 1e-8);
    }
}
