//! The acceptance suite: eleven numerical checks tying the modules together.
//!
//! Each check returns an [`Outcome`] with a pass flag and a one-line
//! measurement summary; errors inside a check count as failures. The `Full`
//! tier uses the reference sizes; `Quick` shrinks the Monte Carlo checks.

use std::f64::consts::PI;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{critical_coupling, decay_asymptotic_ln, decay_series, graf_check};
use crate::dyson::{db_dzeta, solve_b, solve_b_elliptic, DEFAULT_TOL};
use crate::ensemble::{constant_profiles, sample_elliptic, CorrelationProfile, EllipticParams};
use crate::error::Result;
use crate::geometry::{ellipse_point, find_zeta_star, inside_ellipse};
use crate::kernel::{coefficient_a, kernel_elliptic, kernel_general, kernel_independent, tracked_eigenvalue, SingularityData};
use crate::linalg::C64;
use crate::montecarlo::{empirical_spectrum, run_study, McSource, McStudy};
use crate::quadrature::{decay_curve, ContourConfig};

/// Size tier of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Reduced Monte Carlo sizes for a fast smoke run.
    Quick,
    /// Reference sizes.
    Full,
}

/// Result of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Check number, 1 to 11.
    pub id: u8,
    /// Short name.
    pub name: String,
    /// Whether the check passed.
    pub passed: bool,
    /// Measured quantities.
    pub detail: String,
    /// Wall-clock seconds.
    pub seconds: f64,
}

impl Outcome {
    /// `PASS`/`FAIL` line for reports.
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Names of the checks, indexed by id − 1.
pub const NAMES: [&str; 11] = [
    "Dyson solver vs elliptic closed form",
    "kernel cross-form equality",
    "Bessel series vs contour quadrature",
    "Graf addition theorem",
    "corrected large-t asymptotic",
    "critical t^(-1/2) law",
    "Monte Carlo vs Bessel series",
    "spectral concentration",
    "general-profile consistency",
    "A(S,T) elliptic cross-check",
    "derivative oracles",
];

/// Seed shared by every randomized check.
pub const SUITE_SEED: u64 = 20_240_611;

/// Runs one check.
pub fn run(id: u8, tier: Tier) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => dyson_vs_closed_form(),
        2 => kernel_cross_forms(),
        3 => series_vs_quadrature(),
        4 => graf_identity(),
        5 => corrected_asymptotic(),
        6 => critical_slope(),
        7 => monte_carlo_vs_series(tier),
        8 => spectral_concentration(tier),
        9 => general_profile(tier),
        10 => a_cross_check(),
        11 => derivative_oracles(),
        _ => Ok((false, format!("unknown check {id}"))),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id,
        name: NAMES.get(id.wrapping_sub(1) as usize).copied().unwrap_or("unknown").to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every check in order.
pub fn run_all(tier: Tier) -> Vec<Outcome> {
    (1..=11).map(|id| run(id, tier)).collect()
}

type Check = Result<(bool, String)>;

/// A point outside the dilated ellipse: the boundary point at angle φ
/// scaled by `s > 1`.
fn outside_point(rng: &mut ChaCha8Rng, rho: C64) -> C64 {
    let phi = rng.random::<f64>() * 2.0 * PI;
    let s = 1.05 + 2.0 * rng.random::<f64>();
    ellipse_point(rho, phi) * s
}

fn dyson_vs_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let mut worst: f64 = 0.0;
    for rho in [C64::new(0.3, 0.0), C64::new(0.5, 0.0), C64::from_polar(0.7, PI / 4.0)] {
        let p = constant_profiles(200, rho)?;
        for _ in 0..200 {
            let z = outside_point(&mut rng, rho);
            let b = solve_b(z, &p, DEFAULT_TOL)?;
            let e = solve_b_elliptic(z, rho)?;
            worst = worst.max(b.b.iter().map(|v| (v - e).norm()).fold(0.0, f64::max));
        }
    }
    Ok((worst <= 1e-10, format!("max entry-wise deviation {worst:.2e} (tol 1e-10)")))
}

fn kernel_cross_forms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 2);
    let n = 200;
    let rho = C64::new(0.3, 0.2);
    let pc = constant_profiles(n, rho)?;
    let s = Array2::from_shape_fn((n, n), |_| (0.2 + 1.6 * rng.random::<f64>()) / n as f64);
    let pi = CorrelationProfile::new(s.clone(), Array2::zeros((n, n)))?;
    let r = crate::dyson::perron_root(&s);
    let mut worst_e: f64 = 0.0;
    let mut worst_i: f64 = 0.0;
    for _ in 0..50 {
        let z1 = outside_point(&mut rng, rho);
        let z2 = outside_point(&mut rng, rho);
        let kg = kernel_general(z1, z2, &pc)?.value;
        let ke = kernel_elliptic(z1, z2, rho)?;
        worst_e = worst_e.max((kg - ke).norm() / ke.norm().max(1.0));
        let radius = |rng: &mut ChaCha8Rng| r.sqrt() * (1.1 + 2.0 * rng.random::<f64>());
        let w1 = C64::from_polar(radius(&mut rng), 2.0 * PI * rng.random::<f64>());
        let w2 = C64::from_polar(radius(&mut rng), 2.0 * PI * rng.random::<f64>());
        let kg = kernel_general(w1, w2, &pi)?.value;
        let ki = kernel_independent(w1, w2, &s)?;
        worst_i = worst_i.max((kg - ki).norm() / ki.norm().max(1.0));
    }
    Ok((
        worst_e <= 1e-10 && worst_i <= 1e-10,
        format!("vs elliptic {worst_e:.2e}, vs independent {worst_i:.2e} (tol 1e-10)"),
    ))
}

fn series_vs_quadrature() -> Check {
    let rho = C64::new(0.5, 0.0);
    let g = critical_coupling(rho);
    let times = [1.0, 5.0, 10.0, 20.0];
    let p = constant_profiles(200, rho)?;
    let dc = decay_curve(&p, g, &times, &ContourConfig::default())?;
    let mut worst: f64 = 0.0;
    for (j, &t) in times.iter().enumerate() {
        let s = decay_series(rho, g, t, 1e-14)?.value;
        worst = worst.max((dc.deterministic[j] - s).abs() / s);
    }
    Ok((worst <= 1e-6, format!("max relative difference {worst:.2e} with {} nodes (tol 1e-6)", dc.n_nodes)))
}

fn graf_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = C64::from_polar(3.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let y = C64::from_polar(3.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let c = C64::from_polar(0.5 + 1.5 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let nu = rng.random_range(0..3i64);
        let (lhs, rhs) = graf_check(x, y, c, nu, 80)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok((worst < 1e-10, format!("max |lhs − rhs| {worst:.2e} (tol 1e-10)")))
}

fn corrected_asymptotic() -> Check {
    let mut ratios = Vec::new();
    for r in [0.2, 0.5, 0.8] {
        let rho = C64::new(r, 0.0);
        let g = critical_coupling(rho);
        let s = decay_series(rho, g, 200.0, 1e-14)?;
        ratios.push((r, (s.log_value - decay_asymptotic_ln(rho, g, 200.0)).exp()));
    }
    let ok = ratios.iter().all(|(_, q)| (0.98..=1.02).contains(q));
    let detail = ratios.iter().map(|(r, q)| format!("ρ={r}: {q:.6}")).collect::<Vec<_>>().join(", ");
    Ok((ok, format!("series/asymptotic at t=200: {detail} (band [0.98, 1.02])")))
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn critical_slope() -> Check {
    let rho = C64::new(0.5, 0.0);
    let g = critical_coupling(rho);
    let times: Vec<f64> = (0..=36).map(|k| 20.0 + 5.0 * k as f64).collect();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &t in &times {
        lx.push(t.ln());
        ly.push(decay_series(rho, g, t, 1e-14)?.log_value);
    }
    let slope = ls_slope(&lx, &ly);
    Ok(((slope + 0.5).abs() <= 0.05, format!("slope {slope:.4} over t ∈ [20, 200] (target −0.5 ± 0.05)")))
}

fn monte_carlo_vs_series(tier: Tier) -> Check {
    let (n, replicas) = match tier {
        Tier::Full => (500, 20),
        Tier::Quick => (250, 10),
    };
    let rho = C64::new(0.5, 0.0);
    let g = critical_coupling(rho);
    let times: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let study = McStudy {
        source: McSource::Elliptic(EllipticParams { n, rho, gaussian: true }),
        g,
        times,
        replicas,
        base_seed: SUITE_SEED,
        keep_spectra: false,
    };
    let res = run_study(&study)?;
    let band = 5.0 / (n as f64).sqrt();
    let worst = res.mean.iter().zip(&res.reference).map(|(m, r)| (m - r).abs()).fold(0.0, f64::max);
    let good_z = res.z.iter().filter(|z| z.abs() <= 4.0).count() as f64 / res.z.len() as f64;
    Ok((
        worst <= band && good_z >= 0.95,
        format!(
            "N={n}, {replicas} replicas: max |mean − series| {worst:.4} (band {band:.4}), |z| ≤ 4 at {:.0}% of times",
            100.0 * good_z
        ),
    ))
}

fn spectral_concentration(tier: Tier) -> Check {
    let (n, replicas) = match tier {
        Tier::Full => (1000, 10),
        Tier::Quick => (500, 4),
    };
    let rho = C64::new(0.5, 0.0);
    let dilation = 1.0 + (n as f64).powf(-0.25);
    let fractions: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let x = sample_elliptic(&EllipticParams { n, rho, gaussian: true }, crate::ensemble::replica_seed(SUITE_SEED, r))?;
            let ev = empirical_spectrum(&x)?;
            Ok(ev.iter().filter(|l| inside_ellipse(**l / dilation, rho)).count() as f64 / n as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let min = fractions.iter().cloned().fold(1.0, f64::min);
    Ok((min >= 0.99, format!("N={n}, {replicas} replicas: smallest fraction inside {:.4} (need ≥ 0.99)", min)))
}

/// The two-block profile: `s_ij ∈ {0.5/N, 1.5/N}` by column block, with
/// `T = 0.4·√(s∘sᵀ)`.
pub fn two_block_profile(n: usize) -> Result<CorrelationProfile> {
    let nf = n as f64;
    let sb = Array2::from_shape_vec((2, 2), vec![0.5 / nf, 1.5 / nf, 0.5 / nf, 1.5 / nf]).expect("2x2 shape");
    let tb = Array2::from_shape_fn((2, 2), |(i, j)| C64::new(0.4 * (sb[[i, j]] * sb[[j, i]]).sqrt(), 0.0));
    CorrelationProfile::from_blocks(&[n / 2, n - n / 2], &sb, &tb)
}

/// Fits `y ≈ a·(1 + c/t)` by linear least squares in `(a, a·c)`.
pub fn fit_amplitude(times: &[f64], ys: &[f64]) -> (f64, f64) {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in times.iter().zip(ys) {
        let u = 1.0 / t;
        s11 += 1.0;
        s12 += u;
        s22 += u * u;
        r1 += y;
        r2 += u * y;
    }
    let det = s11 * s22 - s12 * s12;
    let a = (s22 * r1 - s12 * r2) / det;
    let ac = (s11 * r2 - s12 * r1) / det;
    (a, ac / a)
}

fn general_profile(tier: Tier) -> Check {
    let (n, replicas) = match tier {
        Tier::Full => (500, 20),
        Tier::Quick => (250, 10),
    };
    let p = two_block_profile(n)?;
    let zs = find_zeta_star(&p, 1e-13)?;
    let sd = coefficient_a(&p, 1e-13)?;
    let g = 1.0 / zs;
    let short: Vec<f64> = (1..=16).map(|k| 0.5 * k as f64).collect();
    let study = McStudy {
        source: McSource::Profile(p.clone()),
        g,
        times: short,
        replicas,
        base_seed: SUITE_SEED + 9,
        keep_spectra: false,
    };
    let res = run_study(&study)?;
    let band = 5.0 / (n as f64).sqrt();
    let worst = res.mean.iter().zip(&res.reference).map(|(m, r)| (m - r).abs()).fold(0.0, f64::max);
    let long: Vec<f64> = (0..=40).map(|k| 20.0 + 2.0 * k as f64).collect();
    let dc = decay_curve(&p, g, &long, &ContourConfig::default())?;
    let scaled: Vec<f64> = long
        .iter()
        .zip(&dc.deterministic)
        .map(|(&t, &d)| d * (2.0 * PI * g * t).sqrt() * (-2.0 * t * (g * zs - 1.0)).exp())
        .collect();
    let (amp, c) = fit_amplitude(&long, &scaled);
    let rel = (amp - sd.a_coeff).abs() / sd.a_coeff;
    Ok((
        worst <= band && rel <= 0.10,
        format!(
            "ζ*={zs:.10}; max |mean − quadrature| {worst:.4} (band {band:.4}); fitted amplitude {amp:.6} (1 + {c:.3}/t) vs A={:.6}, rel {rel:.2e} (tol 0.1)",
            sd.a_coeff
        ),
    ))
}

fn a_cross_check() -> Check {
    let mut worst: f64 = 0.0;
    for r in [0.0, 0.25, 0.5] {
        let p = constant_profiles(200, C64::new(r, 0.0))?;
        let sd = coefficient_a(&p, 1e-13)?;
        let g = 1.0 / sd.zeta_star;
        let expected = (1.0 - r) * (1.0 - r) * (g / 2.0).sqrt();
        worst = worst.max((sd.a_coeff - expected).abs());
    }
    Ok((worst <= 1e-6, format!("max |A − (1−ρ)²√(g/2)| {worst:.2e} (tol 1e-6)")))
}

/// Solves `λ(ζ* + s, w) = 0` for real w near `ζ* − s` by the secant method.
fn implicit_partner(p: &CorrelationProfile, sd: &SingularityData, s: f64) -> Result<f64> {
    let z1 = C64::new(sd.zeta_star + s, 0.0);
    let lam = |w: f64| tracked_eigenvalue(p, sd, z1, C64::new(w, 0.0)).map(|l| l.re);
    let mut w0 = sd.zeta_star - s;
    let mut w1 = w0 + 1e-6;
    let mut f0 = lam(w0)?;
    let mut f1 = lam(w1)?;
    for _ in 0..60 {
        if f1 == f0 {
            break;
        }
        let w2 = w1 - f1 * (w1 - w0) / (f1 - f0);
        w0 = w1;
        f0 = f1;
        w1 = w2;
        f1 = lam(w1)?;
        if (w1 - w0).abs() <= 1e-16 * w1.abs() || f1 == 0.0 {
            break;
        }
    }
    Ok(w1)
}

fn derivative_oracles() -> Check {
    let rho = C64::new(0.5, 0.0);
    let p = constant_profiles(200, rho)?;
    // 𝔟′ at a point of the resolvent set, against a central difference.
    let z = C64::new(1.9, 0.6);
    let h = 1e-5;
    let pr = solve_b(z, &p, 1e-15)?;
    let db = db_dzeta(&pr, &p)?;
    let bp = solve_b(z + h, &p, 1e-15)?;
    let bm = solve_b(z - h, &p, 1e-15)?;
    let fd = (bp.b[0] - bm.b[0]) / (2.0 * h);
    let rel_db = (fd - db[0]).norm() / db[0].norm();

    let sd = coefficient_a(&p, 1e-14)?;
    let zs = C64::new(sd.zeta_star, 0.0);
    let hl = 1e-5;
    let lp = tracked_eigenvalue(&p, &sd, zs, zs + hl)?;
    let lm = tracked_eigenvalue(&p, &sd, zs, zs - hl)?;
    let fd_lambda = ((lp - lm) / (2.0 * hl)).re;
    let rel_lambda = (fd_lambda - sd.d2_lambda).abs() / sd.d2_lambda.abs();

    // The branch point of 𝔟 lies close to ζ*, so the second difference is
    // taken at two steps and extrapolated once (error O(s⁴)).
    let second = |s: f64| -> Result<f64> {
        let wp = implicit_partner(&p, &sd, s)?;
        let wm = implicit_partner(&p, &sd, -s)?;
        Ok((wp - 2.0 * sd.zeta_star + wm) / (s * s))
    };
    let s = 4e-4;
    let fd_z2 = (4.0 * second(s / 2.0)? - second(s)?) / 3.0;
    let rel_z2 = (fd_z2 - sd.d2z2).abs() / sd.d2z2.abs();
    let ok = rel_db <= 1e-6 && rel_lambda <= 1e-6 && rel_z2 <= 1e-6;
    Ok((
        ok,
        format!("relative errors: 𝔟′ {rel_db:.2e}, ∂̄₂λ {rel_lambda:.2e}, ∂²z̄₂ {rel_z2:.2e} (tol 1e-6)"),
    ))
}
