//! The extraspectral Dyson equation `1 + (ζ + T𝔟)𝔟 = 0`, the regularized
//! 2×2 block matrix Dyson equation, and the stability gap Δ_ζ.
//!
//! `solve_b` selects the branch that is analytic at infinity with
//! `ζ𝔟(ζ) → −1` by radial continuation: it starts far out on the ray through
//! ζ, where `𝔟 ≈ −1/ζ`, and walks inwards with a tangent predictor and a
//! Newton corrector, checking the stability gap at every accepted step.

use ndarray::{Array1, Array2};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ensemble::CorrelationProfile;
use crate::linalg::{eigenvalues_real, perron_power, solve, C64};
use crate::reduce::ReducedProfile;

/// Default Newton tolerance for `solve_b`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default membership threshold: ζ ∈ Ê when Δ_ζ exceeds it.
pub const DEFAULT_MEMBER_THRESHOLD: f64 = 1e-6;

const MAX_NEWTON: usize = 40;
const POWER_TOL: f64 = 1e-12;

/// Solution of the Dyson equation at one spectral parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoResolvent {
    /// Spectral parameter ζ.
    pub zeta: C64,
    /// The vector 𝔟(ζ).
    pub b: Array1<C64>,
    /// Stability gap Δ_ζ.
    pub delta: f64,
    /// `‖1 + (ζ + T𝔟)𝔟‖∞`.
    pub residual: f64,
    /// Whether Δ_ζ exceeds the membership threshold.
    pub member: bool,
}

impl PseudoResolvent {
    /// JSON export: `{zeta:[re,im], delta, residual, member, b:[[re,im],…]}`.
    pub fn to_json(&self) -> Value {
        json!({
            "zeta": [self.zeta.re, self.zeta.im],
            "delta": self.delta,
            "residual": self.residual,
            "member": self.member,
            "b": self.b.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        })
    }

    /// Mean `⟨𝔟⟩`.
    pub fn mean_b(&self) -> C64 {
        self.b.sum() / self.b.len() as f64
    }
}

/// Perron root of an entry-wise nonnegative matrix, by power iteration with a
/// dense eigensolver fallback when the iteration stalls.
pub(crate) fn perron_root(m: &Array2<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[[0, 0]];
    }
    let p = perron_power(m, POWER_TOL, 20_000);
    if p.converged {
        return p.radius;
    }
    match eigenvalues_real(m) {
        Ok(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
        Err(_) => p.radius,
    }
}

/// `r(𝔇_{|b|²}S)` for a class vector of a reduced profile.
pub(crate) fn reduced_radius(b: &Array1<C64>, s_hat: &Array2<f64>) -> f64 {
    let mut m = s_hat.clone();
    for (mut row, bi) in m.rows_mut().into_iter().zip(b.iter()) {
        row *= bi.norm_sqr();
    }
    perron_root(&m)
}

fn gap_from_radius(r: f64) -> f64 {
    if r <= 0.0 {
        1.0
    } else {
        (1.0 / r - 1.0).min(1.0)
    }
}

/// Stability gap `Δ = min(r(𝔇_{|b|²}S)⁻¹ − 1, 1)`.
pub fn spectral_gap(b: &Array1<C64>, s: &Array2<f64>) -> f64 {
    gap_from_radius(spectral_radius_weighted(b, s))
}

/// `r(𝔇_{|b|²}S)`, computed by power iteration to relative accuracy 10⁻¹².
pub fn spectral_radius_weighted(b: &Array1<C64>, s: &Array2<f64>) -> f64 {
    let mut m = s.clone();
    for (mut row, bi) in m.rows_mut().into_iter().zip(b.iter()) {
        row *= bi.norm_sqr();
    }
    perron_root(&m)
}

/// `max_i |1 + (ζ + (T𝔟)_i)𝔟_i|`.
fn residual(zeta: C64, b: &Array1<C64>, t: &Array2<C64>) -> f64 {
    let tb = t.dot(b);
    b.iter()
        .zip(tb.iter())
        .map(|(bi, ti)| (C64::new(1.0, 0.0) + (zeta + ti) * bi).norm())
        .fold(0.0, f64::max)
}

/// Newton's method for the Dyson equation on a (possibly reduced) system.
/// Returns the corrected vector and its residual.
pub(crate) fn newton(zeta: C64, b0: &Array1<C64>, t: &Array2<C64>, tol: f64) -> Result<(Array1<C64>, f64)> {
    let k = b0.len();
    let mut b = b0.clone();
    let mut res = residual(zeta, &b, t);
    for _ in 0..MAX_NEWTON {
        let tb = t.dot(&b);
        let f: Array1<C64> = b
            .iter()
            .zip(tb.iter())
            .map(|(bi, ti)| -(C64::new(1.0, 0.0) + (zeta + ti) * bi))
            .collect();
        let mut jac = Array2::<C64>::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                jac[[i, j]] = b[i] * t[[i, j]];
            }
            jac[[i, i]] += zeta + tb[i];
        }
        let step = solve(&jac, &f).map_err(|_| Error::SingularJacobian { zeta })?;
        let step_norm = step.iter().map(|z| z.norm()).fold(0.0, f64::max);
        b = &b + &step;
        if b.iter().any(|z| !z.is_finite()) {
            return Err(Error::SingularJacobian { zeta });
        }
        let new_res = residual(zeta, &b, t);
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        if new_res <= tol && step_norm <= tol.max(1e-15) * scale.max(1.0) {
            return Ok((b, new_res));
        }
        if new_res <= tol * 1e-2 {
            return Ok((b, new_res));
        }
        if !(new_res < 1e3 * res.max(tol)) {
            break;
        }
        res = new_res;
    }
    if res <= tol {
        return Ok((b, res));
    }
    Err(Error::NoConvergence { what: "Dyson Newton iteration", residual: res })
}

/// `𝔟′ = (𝔇_𝔟⁻² − T)⁻¹1` on a (possibly reduced) system.
pub(crate) fn derivative(zeta: C64, b: &Array1<C64>, t: &Array2<C64>) -> Result<Array1<C64>> {
    let k = b.len();
    let mut m = t.mapv(|z| -z);
    for i in 0..k {
        m[[i, i]] += C64::new(1.0, 0.0) / (b[i] * b[i]);
    }
    solve(&m, &Array1::from_elem(k, C64::new(1.0, 0.0))).map_err(|_| Error::SingularJacobian { zeta })
}

/// Outcome of a continuation on a reduced profile.
#[derive(Debug, Clone)]
pub(crate) struct ReducedSolution {
    pub b: Array1<C64>,
    pub residual: f64,
    pub radius: f64,
}

/// Starting radius for the inward continuation.
fn start_radius(red: &ReducedProfile, rho_hat: f64) -> f64 {
    let rs = perron_root(&red.s_hat).max(0.0);
    let t_norm = red
        .t_hat
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    10f64.max(4.0 * (1.0 + rho_hat.min(1.0)) * rs.sqrt()).max(4.0 * t_norm.sqrt())
}

/// Radial continuation from infinity to ζ on a reduced profile.
///
/// `rho_hat` only enters the choice of the starting radius.
///
/// With `relaxed` set the walk does not stop where the stability gap closes:
/// it returns the analytic continuation of the branch from infinity, which is
/// what the level-set raster needs to interpolate Δ smoothly across zero.
pub(crate) fn continue_radially(
    zeta: C64,
    red: &ReducedProfile,
    rho_hat: f64,
    tol: f64,
    relaxed: bool,
) -> Result<ReducedSolution> {
    if zeta.norm() == 0.0 || !zeta.is_finite() {
        return Err(Error::InvalidInput(format!("ζ = {zeta} must be finite and nonzero")));
    }
    let k = red.k();
    let target = zeta.norm();
    let dir = zeta / target;
    let r0 = start_radius(red, rho_hat).max(target);
    let z0 = dir * r0;
    let (mut b, mut res) = newton(z0, &Array1::from_elem(k, -C64::new(1.0, 0.0) / z0), &red.t_hat, tol)?;
    let mut radius = reduced_radius(&b, &red.s_hat);
    if radius >= 1.0 && !relaxed {
        return Err(Error::NonMember { zeta, last_valid: z0 });
    }
    let mut log_r = r0.ln();
    let log_target = target.ln();
    let mut h = 0.1_f64;
    while log_r > log_target {
        let step = h.min(log_r - log_target);
        let next_log = if step == log_r - log_target { log_target } else { log_r - step };
        let z_cur = dir * log_r.exp();
        let z_next = if next_log == log_target { zeta } else { dir * next_log.exp() };
        // Tangent predictor from the implicit-function derivative.
        let predicted = match derivative(z_cur, &b, &red.t_hat) {
            Ok(db) => &b + &(db * (z_next - z_cur)),
            Err(_) => b.clone(),
        };
        match newton(z_next, &predicted, &red.t_hat, tol) {
            Ok((b_new, res_new)) => {
                let r_new = reduced_radius(&b_new, &red.s_hat);
                // Reject steps where the corrector jumped far from the
                // prediction: that signals a branch switch rather than a
                // genuine solution on the continued branch.
                let jump = (&b_new - &predicted).iter().map(|z| z.norm()).fold(0.0, f64::max);
                let bscale = b_new.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if jump > 0.25 * bscale && step > 1e-6 {
                    h = step / 2.0;
                    continue;
                }
                if r_new >= 1.0 && !relaxed {
                    return Err(Error::NonMember { zeta, last_valid: z_cur });
                }
                b = b_new;
                res = res_new;
                radius = r_new;
                log_r = next_log;
                h = (step * 1.5).min(0.5);
            }
            Err(e) => {
                h = step / 2.0;
                if h < 1e-12 {
                    return Err(match e {
                        Error::NoConvergence { .. } => Error::SingularJacobian { zeta: z_next },
                        other => other,
                    });
                }
            }
        }
    }
    Ok(ReducedSolution { b, residual: res, radius })
}

fn assemble(zeta: C64, red: &ReducedProfile, sol: ReducedSolution, member_threshold: f64) -> PseudoResolvent {
    let delta = gap_from_radius(sol.radius);
    PseudoResolvent {
        zeta,
        b: red.expand(&sol.b),
        delta,
        residual: sol.residual,
        member: delta > member_threshold,
    }
}

/// Correlation bound used for start radii: the declared bound or the
/// tightest one, whichever is larger.
pub(crate) fn rho_hat(p: &CorrelationProfile) -> f64 {
    p.rho_bound.max(p.tightest_rho())
}

/// Solves the Dyson equation at ζ on the branch analytic at infinity.
///
/// The membership threshold is [`DEFAULT_MEMBER_THRESHOLD`]; see
/// [`solve_b_with`] to change it.
pub fn solve_b(zeta: C64, p: &CorrelationProfile, tol: f64) -> Result<PseudoResolvent> {
    solve_b_with(zeta, p, tol, DEFAULT_MEMBER_THRESHOLD)
}

/// [`solve_b`] with an explicit membership threshold.
pub fn solve_b_with(zeta: C64, p: &CorrelationProfile, tol: f64, member_threshold: f64) -> Result<PseudoResolvent> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let red = ReducedProfile::new(p);
    let sol = continue_radially(zeta, &red, rho_hat(p), tol, false)?;
    Ok(assemble(zeta, &red, sol, member_threshold))
}

/// Newton-corrects an initial guess at ζ without continuation.
///
/// Used to follow 𝔟 analytically along paths (for instance onto the real
/// point ζ*, which radial continuation cannot certify). The caller is
/// responsible for the branch that `b0` lies on.
pub fn newton_refine(zeta: C64, b0: &Array1<C64>, p: &CorrelationProfile, tol: f64) -> Result<PseudoResolvent> {
    if b0.len() != p.n {
        return Err(Error::InvalidInput(format!("initial guess has length {}, expected {}", b0.len(), p.n)));
    }
    let red = ReducedProfile::new(p);
    let (b, res) = newton(zeta, &red.restrict(b0), &red.t_hat, tol)?;
    let radius = reduced_radius(&b, &red.s_hat);
    Ok(assemble(zeta, &red, ReducedSolution { b, residual: res, radius }, DEFAULT_MEMBER_THRESHOLD))
}

/// Closed-form 𝔟 for the elliptic ensemble: the root of `ρ𝔟² + ζ𝔟 + 1 = 0`
/// with `ζ𝔟 → −1` at infinity.
///
/// Written as `𝔟 = −2/(ζ + a√(w−1)√(w+1))` with `a = 2√ρ`, `w = ζ/a`, which
/// places the branch cut exactly on the segment `[−2√ρ, 2√ρ]` and avoids the
/// cancellation of `−ζ + √(ζ² − 4ρ)` at large ζ.
pub fn solve_b_elliptic(zeta: C64, rho: C64) -> Result<C64> {
    if !zeta.is_finite() || !rho.is_finite() {
        return Err(Error::InvalidInput("ζ and ρ must be finite".into()));
    }
    if rho.norm() == 0.0 {
        if zeta.norm() == 0.0 {
            return Err(Error::InvalidInput("ζ = 0 is not in the resolvent set".into()));
        }
        return Ok(-C64::new(1.0, 0.0) / zeta);
    }
    let a = rho.sqrt() * 2.0;
    let w = zeta / a;
    if w.im.abs() <= 1e-15 * w.norm().max(1.0) && w.re.abs() <= 1.0 {
        return Err(Error::BranchAmbiguity { zeta });
    }
    let one = C64::new(1.0, 0.0);
    let s = a * (w - one).sqrt() * (w + one).sqrt();
    Ok(-2.0 / (zeta + s))
}

/// `∂_ζ𝔟 = 𝔇_𝔟(1 − 𝔇_𝔟T𝔇_𝔟)⁻¹𝔟`, evaluated as `(𝔇_𝔟⁻² − T)⁻¹1`.
pub fn db_dzeta(pr: &PseudoResolvent, p: &CorrelationProfile) -> Result<Array1<C64>> {
    if pr.b.len() != p.n {
        return Err(Error::InvalidInput("pseudo-resolvent does not match the profile".into()));
    }
    let red = ReducedProfile::new(p);
    let db = derivative(pr.zeta, &red.restrict(&pr.b), &red.t_hat)?;
    Ok(red.expand(&db))
}

/// Closed-form derivative of [`solve_b_elliptic`]: `𝔟′ = −𝔟/(2ρ𝔟 + ζ)`.
pub fn db_dzeta_elliptic(zeta: C64, rho: C64) -> Result<C64> {
    let b = solve_b_elliptic(zeta, rho)?;
    Ok(-b / (rho * b * 2.0 + zeta))
}

/// Solution of the 2×2 block matrix Dyson equation at `z = iη`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdeSolution2x2 {
    /// Spectral parameter ζ.
    pub zeta: C64,
    /// Regularization η > 0.
    pub eta: f64,
    /// Upper diagonal block (imaginary part), entry-wise positive.
    pub a: Array1<f64>,
    /// Lower diagonal block (imaginary part), entry-wise positive.
    pub d: Array1<f64>,
    /// Off-diagonal block.
    pub b: Array1<C64>,
    /// Max-norm of the fixed-point defect.
    pub residual: f64,
    /// Fixed-point iterations used.
    pub iterations: usize,
}

/// Solves the 2×2 block MDE at `z = iη` by damped fixed-point iteration.
///
/// With `α = η + S d`, `δ = η + Sᵀa`, `w = ζ + T𝔟` and `D = αδ + |w|²` the
/// block solution satisfies `a = δ/D`, `d = α/D`, `𝔟 = −w̄/D`; as η ↓ 0 inside
/// the resolvent set `a, d → 0` and `𝔟` solves the Dyson equation.
pub fn solve_mde_2x2(zeta: C64, eta: f64, p: &CorrelationProfile, tol: f64) -> Result<MdeSolution2x2> {
    solve_mde_2x2_with(zeta, eta, p, tol, 200_000)
}

/// [`solve_mde_2x2`] with an explicit iteration cap.
pub fn solve_mde_2x2_with(
    zeta: C64,
    eta: f64,
    p: &CorrelationProfile,
    tol: f64,
    max_iter: usize,
) -> Result<MdeSolution2x2> {
    if !(eta > 0.0) {
        return Err(Error::InvalidInput("η must be positive".into()));
    }
    let n = p.n;
    let st = p.s.t().to_owned();
    let mut a = Array1::<f64>::ones(n);
    let mut d = Array1::<f64>::ones(n);
    let mut b = Array1::from_elem(n, -zeta.conj() / (1.0 + zeta.norm_sqr()));
    let damping = 0.5;
    let mut res = f64::INFINITY;
    for it in 1..=max_iter {
        let alpha = p.s.dot(&d) + eta;
        let delta = st.dot(&a) + eta;
        let w = p.t.dot(&b) + zeta;
        let mut res_it: f64 = 0.0;
        let mut a_new = Array1::<f64>::zeros(n);
        let mut d_new = Array1::<f64>::zeros(n);
        let mut b_new = Array1::<C64>::zeros(n);
        for i in 0..n {
            let den = alpha[i] * delta[i] + w[i].norm_sqr();
            let fa = delta[i] / den;
            let fd = alpha[i] / den;
            let fb = -w[i].conj() / den;
            res_it = res_it.max((fa - a[i]).abs()).max((fd - d[i]).abs()).max((fb - b[i]).norm());
            a_new[i] = (1.0 - damping) * a[i] + damping * fa;
            d_new[i] = (1.0 - damping) * d[i] + damping * fd;
            b_new[i] = b[i] * (1.0 - damping) + fb * damping;
        }
        a = a_new;
        d = d_new;
        b = b_new;
        res = res_it;
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            return Ok(MdeSolution2x2 { zeta, eta, a, d, b, residual: res, iterations: it });
        }
    }
    Err(Error::NoConvergence { what: "2x2 block MDE fixed point", residual: res })
}

/// The η ↓ 0 limit of the MDE off-diagonal block, by Richardson
/// extrapolation over `η₀, η₀/2, η₀/4` (error O(η₀³) for a smooth limit).
pub fn mde_b_limit(zeta: C64, eta0: f64, p: &CorrelationProfile, tol: f64) -> Result<Array1<C64>> {
    let b1 = solve_mde_2x2(zeta, eta0, p, tol)?.b;
    let b2 = solve_mde_2x2(zeta, eta0 / 2.0, p, tol)?.b;
    let b4 = solve_mde_2x2(zeta, eta0 / 4.0, p, tol)?.b;
    Ok((b4 * 8.0 - b2 * 6.0 + b1) / 3.0)
}
