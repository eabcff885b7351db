//! Modified Bessel functions `I_k(z)` of integer order and the closed forms of
//! the elliptic-ensemble decay `𝔼‖u_t‖²`.
//!
//! `I_k` is evaluated either by the ascending series or by Miller's backward
//! recurrence normalized with the generating-function identity
//! `Σ_{k∈ℤ} I_k(z) = e^z`. The series is only used where it is free of
//! cancellation; everywhere else the recurrence is both cheaper and accurate.
//! Values are produced in the exponentially scaled form `I_k(z)e^{−|Re z|}`,
//! and the decay quantities are summed in log-space so that long times do
//! not overflow.

use std::f64::consts::{E, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Largest `|Re z|` for which unscaled values are returned.
const MAX_EXP_ARG: f64 = 700.0;
const RESCALE: f64 = 1e200;

/// Whether the ascending series is safe from cancellation at `z` (Re z ≥ 0).
fn use_series(z: C64) -> bool {
    let r = z.norm();
    r <= 2.0 || (r <= 20.0 && z.arg().abs() <= FRAC_PI_4)
}

/// Sum `Σ_m (w²)^m k!/(m!(m+k)!)` of the ascending series, i.e. `I_k(2w)`
/// divided by the leading factor `w^k/k!`.
fn series_tail(k: usize, w: C64) -> C64 {
    let w2 = w * w;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    for m in 1..1000 {
        term = term * w2 / (m as f64 * (m + k) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// `ln k!` for k = 0..=kmax.
fn ln_factorials(kmax: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=kmax {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Scaled values `I_k(z)e^{−Re z}` with `ln|I_k(z)|`, for `Re z ≥ 0`.
fn sequence_right_half(kmax: usize, z: C64) -> (Vec<C64>, Vec<f64>) {
    if z.norm() == 0.0 {
        let mut vals = vec![C64::new(0.0, 0.0); kmax + 1];
        let mut logs = vec![f64::NEG_INFINITY; kmax + 1];
        vals[0] = C64::new(1.0, 0.0);
        logs[0] = 0.0;
        return (vals, logs);
    }
    if use_series(z) {
        let w = z / 2.0;
        let lnw = w.norm().ln();
        let lnf = ln_factorials(kmax);
        let phase_w = w / w.norm();
        let mut vals = Vec::with_capacity(kmax + 1);
        let mut logs = Vec::with_capacity(kmax + 1);
        let mut phase = C64::new(1.0, 0.0);
        for (k, lnk) in lnf.iter().enumerate() {
            let tail = series_tail(k, w);
            let ln_abs = k as f64 * lnw - lnk + tail.norm().ln();
            let arg_part = phase * tail / tail.norm();
            vals.push(arg_part * (ln_abs - z.re).exp());
            logs.push(ln_abs);
            phase *= phase_w;
        }
        return (vals, logs);
    }
    // Miller's backward recurrence f_{k−1} = f_{k+1} + (2k/z) f_k from a
    // starting index far beyond both kmax and |z|, where I_k is negligible.
    let m_start = kmax + 2 * (z.norm().ceil() as usize) + 60;
    let mut f_next = C64::new(0.0, 0.0);
    let mut f_cur = C64::new(1e-30, 0.0);
    let mut log_scale = 0.0_f64;
    let mut stored: Vec<(C64, f64)> = vec![(C64::new(0.0, 0.0), 0.0); kmax + 1];
    // Normalization sum f₀ + 2Σ_{k≥1} f_k in the current scale.
    let mut sum = if m_start <= kmax { C64::new(0.0, 0.0) } else { f_cur * 2.0 };
    if m_start <= kmax {
        stored[m_start] = (f_cur, log_scale);
    }
    for k in (1..=m_start).rev() {
        let f_prev = f_next + f_cur * (2.0 * k as f64) / z;
        f_next = f_cur;
        f_cur = f_prev;
        let idx = k - 1;
        sum += if idx == 0 { f_cur } else { f_cur * 2.0 };
        if idx <= kmax {
            stored[idx] = (f_cur, log_scale);
        }
        if f_cur.norm() > RESCALE {
            f_cur /= RESCALE;
            f_next /= RESCALE;
            sum /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    // I_k(z) = f_k e^{z}/S, hence I_k e^{−Re z} = f_k e^{i Im z}/S.
    let phase = C64::from_polar(1.0, z.im);
    let ln_sum = sum.norm().ln();
    let mut vals = Vec::with_capacity(kmax + 1);
    let mut logs = Vec::with_capacity(kmax + 1);
    // Divide by S through its modulus and phase: S itself can be far beyond
    // the range where |S|² is representable.
    let sum_phase = (sum / sum.norm()).conj();
    for (f, ls) in stored {
        let rel = ls - log_scale;
        if f.norm() == 0.0 {
            vals.push(C64::new(0.0, 0.0));
            logs.push(f64::NEG_INFINITY);
            continue;
        }
        let ln_ratio = f.norm().ln() + rel - ln_sum;
        vals.push(f / f.norm() * phase * sum_phase * ln_ratio.exp());
        logs.push(ln_ratio + z.re);
    }
    (vals, logs)
}

fn sequence_impl(kmax: usize, z: C64) -> (Vec<C64>, Vec<f64>) {
    if z.re >= 0.0 {
        sequence_right_half(kmax, z)
    } else {
        // I_k(−z) = (−1)^k I_k(z); the scaling factor e^{−|Re z|} is unchanged.
        let (mut vals, logs) = sequence_right_half(kmax, -z);
        for (k, v) in vals.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
        (vals, logs)
    }
}

/// Scaled values `I_k(z)·e^{−|Re z|}` for `k = 0..=kmax`.
pub fn bessel_i_scaled_sequence(kmax: usize, z: C64) -> Vec<C64> {
    sequence_impl(kmax, z).0
}

/// `ln|I_k(z)|` for `k = 0..=kmax`, free of overflow and of underflow of the
/// leading power `(z/2)^k/k!`.
pub fn ln_abs_bessel_i_sequence(kmax: usize, z: C64) -> Vec<f64> {
    sequence_impl(kmax, z).1
}

/// Scaled modified Bessel function `I_k(z)·e^{−|Re z|}`; `I_{−k} = I_k`.
pub fn bessel_i_scaled(k: i64, z: C64) -> C64 {
    let k = k.unsigned_abs() as usize;
    sequence_impl(k, z).0[k]
}

/// Modified Bessel function of the first kind `I_k(z)` of integer order.
pub fn bessel_i(k: i64, z: C64) -> Result<C64> {
    if !z.is_finite() {
        return Err(Error::InvalidInput(format!("argument {z} is not finite")));
    }
    if z.re.abs() > MAX_EXP_ARG {
        return Err(Error::Overflow(format!("I_{k}({z}) exceeds the f64 range; use bessel_i_scaled")));
    }
    Ok(bessel_i_scaled(k, z) * z.re.abs().exp())
}

/// Critical coupling `1/ζ*` of the elliptic ensemble, with `ζ* = |1 + ρ|`.
pub fn critical_coupling(rho: C64) -> f64 {
    1.0 / (C64::new(1.0, 0.0) + rho).norm()
}

/// Result of the elliptic decay series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselSeriesResult {
    /// `e^{−2t}Σ_{j≥1}|ρ|^{−j}|(j/tg)I_j(2√ρtg)|²`.
    pub value: f64,
    /// Natural logarithm of `value`, valid even where `value` over- or underflows.
    pub log_value: f64,
    /// Index of the last term included.
    pub terms_used: usize,
    /// First omitted term relative to `value`.
    pub truncation_bound: f64,
}

/// Adds `exp(l)` to a log-domain accumulator.
fn log_add(acc: f64, l: f64) -> f64 {
    if acc == f64::NEG_INFINITY {
        return l;
    }
    if l == f64::NEG_INFINITY {
        return acc;
    }
    let (hi, lo) = if acc > l { (acc, l) } else { (l, acc) };
    hi + (lo - hi).exp().ln_1p()
}

/// The decay `𝔼‖u_t‖²` of the elliptic ensemble as the Bessel series
/// `e^{−2t} Σ_{j≥1} |ρ|^{−j} |(j/tg) I_j(2√ρ tg)|²`.
///
/// Terms are added until the index exceeds `e·|√ρ|tg` (before that point the
/// factor `|ρ|^{−j}` can still outgrow the Bessel decay) and the current term
/// falls below `tol` times the partial sum. Every term is formed in log-space.
/// At ρ = 0 the series collapses to `e^{−2t}I₀(2tg)`.
pub fn decay_series(rho: C64, g: f64, t: f64, tol: f64) -> Result<BesselSeriesResult> {
    if !(rho.norm() < 1.0) {
        return Err(Error::InvalidInput(format!("|ρ| = {} but the series needs |ρ| < 1", rho.norm())));
    }
    if !(g > 0.0) || !(t >= 0.0) || !t.is_finite() || !(tol > 0.0) {
        return Err(Error::InvalidInput("need g > 0, finite t ≥ 0 and tol > 0".into()));
    }
    if t == 0.0 {
        return Ok(BesselSeriesResult { value: 1.0, log_value: 0.0, terms_used: 1, truncation_bound: 0.0 });
    }
    let x = t * g;
    if rho.norm() == 0.0 {
        let arg = C64::new(2.0 * x, 0.0);
        let ln_i0 = ln_abs_bessel_i_sequence(0, arg)[0];
        let log_value = -2.0 * t + ln_i0;
        return Ok(BesselSeriesResult { value: log_value.exp(), log_value, terms_used: 0, truncation_bound: 0.0 });
    }
    let z = rho.sqrt() * (2.0 * x);
    let ln_rho = rho.norm().ln();
    let min_index = (E * rho.norm().sqrt() * x).ceil().max(1.0) as usize;
    let mut kmax = ((E * x).ceil() as usize).max(min_index) + 40;
    let ln_tol = tol.ln();
    loop {
        let ln_i = ln_abs_bessel_i_sequence(kmax + 1, z);
        let ln_term = |j: usize| -2.0 * t - j as f64 * ln_rho + 2.0 * (j as f64 / x).ln() + 2.0 * ln_i[j];
        let mut acc = f64::NEG_INFINITY;
        for j in 1..=kmax {
            let lt = ln_term(j);
            acc = log_add(acc, lt);
            let next = ln_term(j + 1);
            if j >= min_index && next - acc < ln_tol && lt - acc < ln_tol {
                return Ok(BesselSeriesResult {
                    value: acc.exp(),
                    log_value: acc,
                    terms_used: j,
                    truncation_bound: (next - acc).exp(),
                });
            }
        }
        if kmax > 4_000_000 {
            let next = ln_term(kmax + 1);
            return Ok(BesselSeriesResult {
                value: acc.exp(),
                log_value: acc,
                terms_used: kmax,
                truncation_bound: (next - acc).exp(),
            });
        }
        kmax *= 2;
    }
}

/// Coefficient `(1+|ρ|²) − 2Re((ρ+|ρ|²)/(ρ+1))`; equals `(1−ρ)²` for real ρ.
pub fn asymptotic_coefficient(rho: C64) -> f64 {
    let r2 = rho.norm_sqr();
    (1.0 + r2) - 2.0 * ((rho + r2) / (rho + 1.0)).re
}

/// Natural logarithm of [`decay_asymptotic`].
pub fn decay_asymptotic_ln(rho: C64, g: f64, t: f64) -> f64 {
    let zs = (C64::new(1.0, 0.0) + rho).norm();
    2.0 * t * (g * zs - 1.0) - 0.5 * (2.0 * PI * 2.0 * t * g * zs).ln() + asymptotic_coefficient(rho).ln()
}

/// Large-t leading term of the elliptic decay:
/// `e^{2t(gζ*−1)}/√(2π·2tgζ*)·((1+|ρ|²) − 2Re((ρ+|ρ|²)/(ρ+1)))` with
/// `ζ* = √(2Re ρ + |ρ|² + 1)`.
pub fn decay_asymptotic(rho: C64, g: f64, t: f64) -> f64 {
    decay_asymptotic_ln(rho, g, t).exp()
}

/// Closed form of the decay summed over all `j ∈ ℤ` (Graf's addition theorem):
/// `e^{−2t}[(1+|ρ|²)I₀(2tgζ*) − 2Re((ρ+|ρ|²)/(ρ+1))·I₂(2tgζ*)]`.
///
/// It exceeds [`decay_series`] by the (small) negatively indexed terms.
pub fn decay_full_lattice(rho: C64, g: f64, t: f64) -> f64 {
    let zs = (C64::new(1.0, 0.0) + rho).norm();
    let arg = 2.0 * t * g * zs;
    let seq = bessel_i_scaled_sequence(2, C64::new(arg, 0.0));
    let c2 = 2.0 * ((rho + rho.norm_sqr()) / (rho + 1.0)).re;
    let scaled = (1.0 + rho.norm_sqr()) * seq[0].re - c2 * seq[2].re;
    scaled * (arg - 2.0 * t).exp()
}

/// Both sides of Graf's addition theorem:
/// `lhs = Σ_{n=−N}^{N} cⁿ I_{n+ν}(x) I_n(y)` and
/// `rhs = ((x + y/c)/(x + yc))^{ν/2} I_ν(√((x + y/c)(x + yc)))`.
///
/// The square roots of the two factors are taken separately, so the pair
/// (root ratio, argument) changes sign together and the result does not
/// depend on the branch.
pub fn graf_check(x: C64, y: C64, c: C64, nu: i64, n_terms: usize) -> Result<(C64, C64)> {
    if c.norm() == 0.0 {
        return Err(Error::InvalidInput("c must be nonzero".into()));
    }
    if n_terms == 0 {
        return Err(Error::InvalidInput("need at least one term".into()));
    }
    let nt = n_terms as i64;
    let kmax = (nt + nu.abs()) as usize;
    let ix = bessel_i_scaled_sequence(kmax, x);
    let iy = bessel_i_scaled_sequence(kmax, y);
    let get = |seq: &Vec<C64>, k: i64| seq[k.unsigned_abs() as usize];
    let scale = (x.re.abs() + y.re.abs()).exp();
    let mut lhs = C64::new(0.0, 0.0);
    for n in -nt..=nt {
        lhs += c.powi(n as i32) * get(&ix, n + nu) * get(&iy, n);
    }
    lhs *= scale;
    let a = x + y / c;
    let b = x + y * c;
    let sa = a.sqrt();
    let sb = b.sqrt();
    let arg = sa * sb;
    let rhs = if sb.norm() == 0.0 {
        if nu == 0 { bessel_i(0, arg)? } else { C64::new(0.0, 0.0) }
    } else {
        (sa / sb).powi(nu as i32) * bessel_i(nu, arg)?
    };
    Ok((lhs, rhs))
}

/// Upper bound `e^{4|Re√ρ|tg}·|ρ|(1+|ρ|)/((tg)²(1−|ρ|)³)` on the negatively
/// indexed lattice sum `Σ_{j≤−1}|ρ|^{−j}|(j/tg)I_j(2√ρtg)|²`.
///
/// The bound is for the bare sum; the decay itself carries an extra `e^{−2t}`.
pub fn negative_tail_bound(rho: C64, g: f64, t: f64) -> f64 {
    let r = rho.norm();
    if r == 0.0 {
        return 0.0;
    }
    let x = t * g;
    let ln = 4.0 * rho.sqrt().re.abs() * x + r.ln() + (1.0 + r).ln() - 2.0 * x.ln() - 3.0 * (1.0 - r).ln();
    ln.exp()
}
