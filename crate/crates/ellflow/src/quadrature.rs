//! Contours in the resolvent set and the contour-integral representations of
//! `tr_N f(X)`, `tr_N f(X)g(X*)` and the deterministic decay curve.
//!
//! All integrals use the trapezoidal rule on smooth closed curves, which
//! converges geometrically for analytic integrands. 𝔟 is computed once per
//! node; the double integral needs the kernel at every node pair, and the
//! Hermitian symmetry `K(ζ₂, ζ₁) = conj K(ζ₁, ζ₂)` halves that work.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::dyson::{continue_radially, rho_hat, DEFAULT_TOL};
use crate::ensemble::CorrelationProfile;
use crate::error::{Error, Result};
use crate::geometry::{zeta_cap, zeta_star_reduced};
use crate::kernel::{kernel_reduced, singularity_from};
use crate::linalg::{eig_real, solve, C64};
use crate::reduce::ReducedProfile;

/// Direction of traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Counter-clockwise (positive).
    Ccw,
    /// Clockwise (negative).
    Cw,
}

/// Shape of a contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContourKind {
    /// Circle about the origin.
    Circle {
        /// Radius.
        radius: f64,
    },
    /// Dilated boundary of the elliptic domain `E_ρ`, scaled by `scale`.
    DilatedEllipse {
        /// Correlation parameter of the ellipse.
        rho: C64,
        /// Relative dilation ε.
        epsilon: f64,
        /// Overall scale (√σ for a constant profile of variance σ/N).
        scale: f64,
    },
}

/// A closed quadrature path: nodes and `dζ`-weights of the trapezoidal rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    /// Nodes ζ_k.
    pub nodes: Vec<C64>,
    /// Weights `ζ′(φ_k)·Δφ`, so that `∮ h dζ ≈ Σ h(ζ_k) w_k`.
    pub weights: Vec<C64>,
    /// Direction of traversal.
    pub orientation: Orientation,
    /// Construction metadata.
    pub kind: ContourKind,
}

impl Contour {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Whether the contour has no nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∮ h(ζ) dζ` by the trapezoidal rule.
    pub fn integrate(&self, h: impl Fn(C64) -> C64) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| h(z) * w).sum()
    }

    /// Winding number about `p`, `(1/2πi)∮ dζ/(ζ − p)`.
    pub fn winding_number(&self, p: C64) -> C64 {
        self.integrate(|z| C64::new(1.0, 0.0) / (z - p)) / C64::new(0.0, 2.0 * PI)
    }

    /// The same contour with `n` nodes.
    pub fn with_nodes(&self, n: usize) -> Result<Contour> {
        match self.kind {
            ContourKind::Circle { radius } => circle_contour(radius, n, self.orientation),
            ContourKind::DilatedEllipse { rho, epsilon, scale } => {
                scaled_ellipse_contour(rho, epsilon, scale, n, self.orientation)
            }
        }
    }
}

/// Circle `|ζ| = radius` with trapezoidal nodes `radius·e^{±2πik/n}`.
pub fn circle_contour(radius: f64, n: usize, orientation: Orientation) -> Result<Contour> {
    if !(radius > 0.0) || !radius.is_finite() || n < 8 {
        return Err(Error::InvalidInput(format!("circle needs radius > 0 and n ≥ 8 (got {radius}, {n})")));
    }
    let sign = match orientation {
        Orientation::Ccw => 1.0,
        Orientation::Cw => -1.0,
    };
    let step = 2.0 * PI / n as f64;
    let nodes: Vec<C64> = (0..n).map(|k| C64::from_polar(radius, sign * step * k as f64)).collect();
    let weights = nodes.iter().map(|&z| C64::new(0.0, sign * step) * z).collect();
    Ok(Contour { nodes, weights, orientation, kind: ContourKind::Circle { radius } })
}

/// Dilated ellipse `ζ(φ) = (1+ε)e^{iθ/2}(|ρ|e^{iφ} + e^{−iφ})`, `ρ = |ρ|e^{iθ}`.
///
/// With increasing φ the curve runs clockwise, so the counter-clockwise
/// version samples `φ_k = −2πk/n`.
pub fn dilated_ellipse_contour(rho: C64, epsilon: f64, n: usize, orientation: Orientation) -> Result<Contour> {
    scaled_ellipse_contour(rho, epsilon, 1.0, n, orientation)
}

fn scaled_ellipse_contour(rho: C64, epsilon: f64, scale: f64, n: usize, orientation: Orientation) -> Result<Contour> {
    if !(rho.norm() < 1.0) || !(epsilon > 0.0) || n < 8 || !(scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "ellipse needs |ρ| < 1, ε > 0 and n ≥ 8 (got {rho}, {epsilon}, {n})"
        )));
    }
    let sign = match orientation {
        Orientation::Ccw => -1.0,
        Orientation::Cw => 1.0,
    };
    let a = rho.norm();
    let rot = C64::from_polar(scale * (1.0 + epsilon), 0.5 * rho.arg());
    let step = 2.0 * PI / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        let phi = sign * step * k as f64;
        let e = C64::from_polar(1.0, phi);
        nodes.push(rot * (a * e + e.conj()));
        let dz = rot * C64::new(0.0, 1.0) * (a * e - e.conj());
        weights.push(dz * (sign * step));
    }
    Ok(Contour { nodes, weights, orientation, kind: ContourKind::DilatedEllipse { rho, epsilon, scale } })
}

/// Class vectors of 𝔟 at every node, each certified to lie in the resolvent
/// set.
fn node_solutions(c: &Contour, red: &ReducedProfile, rho_hat: f64) -> Result<Vec<Array1<C64>>> {
    c.nodes
        .par_iter()
        .map(|&z| continue_radially(z, red, rho_hat, DEFAULT_TOL, false).map(|s| s.b))
        .collect()
}

/// Deterministic limit of `tr_N f(X)`: `−(1/2πi) Σ_k f(ζ_k)⟨𝔟(ζ_k)⟩ w_k`.
pub fn trace_f<F>(c: &Contour, f: F, p: &CorrelationProfile) -> Result<C64>
where
    F: Fn(C64) -> C64,
{
    let red = ReducedProfile::new(p);
    let bs = node_solutions(c, &red, rho_hat(p))?;
    let mut acc = C64::new(0.0, 0.0);
    for ((&z, &w), b) in c.nodes.iter().zip(&c.weights).zip(&bs) {
        acc += f(z) * red.mean(b) * w;
    }
    Ok(-acc / C64::new(0.0, 2.0 * PI))
}

/// Kernel values at all node pairs of a contour.
struct KernelTable {
    values: Array2<C64>,
    warnings: Vec<String>,
}

/// Spectral data for the kernel of an independent-entry profile: with
/// `S = VΛV⁻¹`, `K = Σ_m c_m/(ζ₁ζ̄₂ − λ_m)` where `c_m = ⟨1ᵀV⟩_m (V⁻¹1)_m / N`.
struct IndependentKernel {
    lambdas: Array1<C64>,
    coeffs: Array1<C64>,
}

impl IndependentKernel {
    fn new(s_hat: &Array2<f64>, weights: &Array1<f64>) -> Option<Self> {
        let k = s_hat.nrows();
        let (lambdas, v) = eig_real(s_hat).ok()?;
        let ones = Array1::from_elem(k, C64::new(1.0, 0.0));
        let x = solve(&v, &ones).ok()?;
        let wv: Array1<C64> = (0..k).map(|m| (0..k).map(|c| v[[c, m]] * weights[c]).sum()).collect();
        let coeffs = &wv * &x;
        Some(IndependentKernel { lambdas, coeffs })
    }

    fn eval(&self, w: C64) -> C64 {
        self.lambdas.iter().zip(&self.coeffs).map(|(&l, &c)| c / (w - l)).sum()
    }
}

fn kernel_table(c: &Contour, red: &ReducedProfile, bs: &[Array1<C64>], independent: bool) -> Result<KernelTable> {
    let n = c.len();
    // For T = 0 an eigen-decomposition of Ŝ turns each pair into an O(K)
    // sum; it is cross-checked against the direct solve before use.
    let spectral = if independent && red.k() > 2 {
        IndependentKernel::new(&red.s_hat, &red.weights()).filter(|ik| {
            [(0, 0), (0, n / 3), (n / 2, n / 5)].iter().all(|&(a, b)| {
                let w = c.nodes[a] * c.nodes[b].conj();
                match kernel_reduced(&bs[a], &bs[b], red) {
                    Ok(direct) => (ik.eval(w) - direct).norm() <= 1e-11 * (1.0 + direct.norm()),
                    Err(_) => false,
                }
            })
        })
    } else {
        None
    };
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (a..n)
                .map(|b| match &spectral {
                    Some(ik) => Ok(ik.eval(c.nodes[a] * c.nodes[b].conj())),
                    None => kernel_reduced(&bs[a], &bs[b], red),
                })
                .collect::<Result<Vec<C64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Array2::<C64>::zeros((n, n));
    for (a, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            values[[a, a + off]] = v;
            values[[a + off, a]] = v.conj();
        }
    }
    let mut warnings = Vec::new();
    let mut worst: f64 = 1.0;
    for a in 0..n {
        for b in 0..n {
            let (x, y) = (values[[a, b]].norm(), values[[a, (b + 1) % n]].norm());
            let ratio = if x < y { y / x } else { x / y };
            if ratio.is_finite() {
                worst = worst.max(ratio);
            }
        }
    }
    if worst > 1e3 {
        let msg = format!("kernel varies by a factor {worst:.3e} between adjacent nodes; singularity under-resolved");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(KernelTable { values, warnings })
}

fn is_independent(p: &CorrelationProfile) -> bool {
    p.t.iter().all(|z| *z == C64::new(0.0, 0.0))
}

/// Deterministic limit of `tr_N f(X)g(X*)`:
/// `(1/4π²) Σ_{k,l} f(ζ_k) g(ζ̄_l) K(ζ_k, ζ_l) w_k w̄_l`.
///
/// The second integral runs over the conjugate contour, which has the
/// opposite orientation; the two factors `1/2πi` and `−1/2πi` combine to
/// `1/4π²`.
pub fn trace_fg<F, G>(c: &Contour, f: F, g: G, p: &CorrelationProfile) -> Result<C64>
where
    F: Fn(C64) -> C64,
    G: Fn(C64) -> C64,
{
    let red = ReducedProfile::new(p);
    let bs = node_solutions(c, &red, rho_hat(p))?;
    let table = kernel_table(c, &red, &bs, is_independent(p))?;
    let fv: Vec<C64> = c.nodes.iter().zip(&c.weights).map(|(&z, &w)| f(z) * w).collect();
    let gv: Vec<C64> = c.nodes.iter().zip(&c.weights).map(|(&z, &w)| g(z.conj()) * w.conj()).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (a, fa) in fv.iter().enumerate() {
        let row: C64 = gv.iter().enumerate().map(|(b, gb)| table.values[[a, b]] * gb).sum();
        acc += fa * row;
    }
    Ok(acc / (4.0 * PI * PI))
}

/// Contour shape used by [`decay_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ContourChoice {
    /// Dilated ellipse for constant profiles, the circle of radius `ζ*(1+ε)`
    /// for nonnegative `T`, otherwise the circle of radius `ζ_cap·(1+ε)`.
    Auto,
    /// A circle of the given radius.
    Circle {
        /// Radius.
        radius: f64,
    },
}

/// Settings of the adaptive contour quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourConfig {
    /// Relative dilation ε of the automatic contour.
    pub epsilon: f64,
    /// Initial node count; default `max(128, 16⌈√(g·t_max)⌉)`.
    pub n_initial: Option<usize>,
    /// Cap on the node count.
    pub n_max: usize,
    /// Relative agreement required between successive refinements.
    pub rel_tol: f64,
    /// Contour shape.
    pub choice: ContourChoice,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { epsilon: 0.05, n_initial: None, n_max: 2048, rel_tol: 1e-6, choice: ContourChoice::Auto }
    }
}

/// The deterministic decay `𝔼‖u_t‖²` and its leading large-t asymptotics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    /// Times.
    pub times: Vec<f64>,
    /// Double-contour values `tr_N e^{t(gX*−1)}e^{t(gX−1)}` (real part).
    pub deterministic: Vec<f64>,
    /// Per-time error estimate: the larger of the imaginary part and the
    /// change under the last node doubling.
    pub quad_err: Vec<f64>,
    /// `A(S,T)·e^{2t(gζ*−1)}/√(2πgt)`; NaN at `t = 0` or where A is unavailable.
    pub asymptotic: Vec<f64>,
    /// Coupling g.
    pub g: f64,
    /// ζ* when it is defined (nonnegative `T` or constant profile).
    pub zeta_star: Option<f64>,
    /// A(S, T) when it is available.
    pub a_coeff: Option<f64>,
    /// Final node count.
    pub n_nodes: usize,
    /// The contour used.
    pub contour: ContourKind,
    /// Diagnostics (under-resolution, refinement cap).
    pub warnings: Vec<String>,
}

/// Asymptotic data of a profile: ζ*, A(S, T) and a log-space closure for the
/// leading term, when available.
struct Asymptotics {
    zeta_star: Option<f64>,
    a_coeff: Option<f64>,
    elliptic_rho: Option<C64>,
}

impl Asymptotics {
    fn of(p: &CorrelationProfile, red: &ReducedProfile) -> Result<Self> {
        if red.k() == 1 && (red.s_hat[[0, 0]] - 1.0).abs() < 1e-12 {
            let rho = red.t_hat[[0, 0]] / red.s_hat[[0, 0]];
            return Ok(Asymptotics {
                zeta_star: Some((C64::new(1.0, 0.0) + rho).norm()),
                a_coeff: None,
                elliptic_rho: Some(rho),
            });
        }
        if p.t_is_nonnegative() {
            let zs = zeta_star_reduced(p, red, 1e-13)?;
            let sd = singularity_from(p, red, zs.zeta_star, &zs.b)?;
            return Ok(Asymptotics { zeta_star: Some(zs.zeta_star), a_coeff: Some(sd.a_coeff), elliptic_rho: None });
        }
        Ok(Asymptotics { zeta_star: None, a_coeff: None, elliptic_rho: None })
    }

    fn leading(&self, g: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NAN;
        }
        if let Some(rho) = self.elliptic_rho {
            return bessel::decay_asymptotic(rho, g, t);
        }
        match (self.zeta_star, self.a_coeff) {
            (Some(zs), Some(a)) => (a.ln() + 2.0 * t * (g * zs - 1.0) - 0.5 * (2.0 * PI * g * t).ln()).exp(),
            _ => f64::NAN,
        }
    }
}

fn auto_contour(p: &CorrelationProfile, red: &ReducedProfile, asym: &Asymptotics, cfg: &ContourConfig, n: usize) -> Result<Contour> {
    match cfg.choice {
        ContourChoice::Circle { radius } => circle_contour(radius, n, Orientation::Ccw),
        ContourChoice::Auto => {
            if red.k() == 1 {
                let sigma = red.s_hat[[0, 0]];
                let rho = red.t_hat[[0, 0]] / sigma;
                if rho.norm() < 1.0 && sigma > 0.0 {
                    return scaled_ellipse_contour(rho, cfg.epsilon, sigma.sqrt(), n, Orientation::Ccw);
                }
            }
            let radius = match asym.zeta_star {
                Some(zs) => zs,
                None => zeta_cap(p),
            };
            circle_contour(radius * (1.0 + cfg.epsilon), n, Orientation::Ccw)
        }
    }
}

/// Values of the decay at all times on one contour.
fn decay_on(c: &Contour, red: &ReducedProfile, rho_hat: f64, independent: bool, g: f64, times: &[f64]) -> Result<(Vec<C64>, Vec<f64>, Vec<String>)> {
    let bs = node_solutions(c, red, rho_hat)?;
    let table = kernel_table(c, red, &bs, independent)?;
    let max_re = c.nodes.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let mut values = Vec::with_capacity(times.len());
    let mut scales = Vec::with_capacity(times.len());
    for &t in times {
        let fv: Vec<C64> = c
            .nodes
            .iter()
            .zip(&c.weights)
            .map(|(&z, &w)| (t * (g * z - 1.0)).exp() * w)
            .collect();
        let acc: C64 = (0..c.len())
            .into_par_iter()
            .map(|a| {
                let row: C64 = (0..c.len()).map(|b| table.values[[a, b]] * fv[b].conj()).sum();
                fv[a] * row
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        values.push(acc / (4.0 * PI * PI));
        scales.push((2.0 * t * (g * max_re - 1.0)).exp());
    }
    Ok((values, scales, table.warnings))
}

/// The deterministic decay curve by double-contour quadrature.
///
/// The node count starts at `max(128, 16⌈√(g·t_max)⌉)` (or the configured
/// value) and doubles until two successive results agree to `rel_tol` at
/// every time (up to an absolute floor tied to the integrand's size on the
/// contour), or the cap is reached. Requires `g ≤ 1/ζ*` where ζ* is defined.
pub fn decay_curve(p: &CorrelationProfile, g: f64, times: &[f64], cfg: &ContourConfig) -> Result<DecayCurve> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidInput(format!("coupling g = {g} must be positive")));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("times must be finite and nonnegative".into()));
    }
    if !(cfg.rel_tol > 0.0) || cfg.n_max < 8 {
        return Err(Error::InvalidInput("invalid contour configuration".into()));
    }
    let red = ReducedProfile::new(p);
    let asym = Asymptotics::of(p, &red)?;
    if let Some(zs) = asym.zeta_star {
        if g * zs > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!("g = {g} exceeds the critical coupling 1/ζ* = {}", 1.0 / zs)));
        }
    }
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let mut n = cfg
        .n_initial
        .unwrap_or_else(|| 128usize.max(16 * (g * t_max).sqrt().ceil() as usize))
        .max(8)
        .min(cfg.n_max);
    let rh = rho_hat(p);
    let independent = is_independent(p);
    let mut contour = auto_contour(p, &red, &asym, cfg, n)?;
    let (mut prev, _, mut warnings) = decay_on(&contour, &red, rh, independent, g, times)?;
    let mut errors = vec![f64::INFINITY; times.len()];
    loop {
        if 2 * n > cfg.n_max {
            let msg = format!("node cap {} reached before refinements agreed to {}", cfg.n_max, cfg.rel_tol);
            log::warn!("{msg}");
            warnings.push(msg);
            break;
        }
        n *= 2;
        contour = contour.with_nodes(n)?;
        let (next, scales, w) = decay_on(&contour, &red, rh, independent, g, times)?;
        let mut converged = true;
        for j in 0..times.len() {
            let diff = (next[j] - prev[j]).norm();
            errors[j] = diff.max(next[j].im.abs());
            if diff > cfg.rel_tol * next[j].norm() + 1e-13 * scales[j] {
                converged = false;
            }
        }
        prev = next;
        warnings = w;
        if converged {
            break;
        }
    }
    let deterministic: Vec<f64> = prev.iter().map(|z| z.re).collect();
    for (j, &t) in times.iter().enumerate() {
        if t == 0.0 {
            errors[j] = errors[j].min((prev[j] - 1.0).norm().max(prev[j].im.abs()));
        }
    }
    let asymptotic = times.iter().map(|&t| asym.leading(g, t)).collect();
    Ok(DecayCurve {
        times: times.to_vec(),
        deterministic,
        quad_err: errors,
        asymptotic,
        g,
        zeta_star: asym.zeta_star,
        a_coeff: asym.a_coeff.or_else(|| asym.elliptic_rho.map(|r| {
            let zs = (C64::new(1.0, 0.0) + r).norm();
            bessel::asymptotic_coefficient(r) / (2.0 * zs).sqrt()
        })),
        n_nodes: n,
        contour: contour.kind,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_integrates_residues() {
        let c = circle_contour(1.0, 64, Orientation::Ccw).unwrap();
        let r = c.integrate(|z| C64::new(1.0, 0.0) / z);
        assert!((r - C64::new(0.0, 2.0 * PI)).norm() < 1e-12);
        let cw = circle_contour(1.0, 64, Orientation::Cw).unwrap();
        assert!((cw.winding_number(C64::new(0.3, 0.0)) + 1.0).norm() < 1e-12);
    }

    #[test]
    fn ellipse_is_closed_and_positive() {
        let c = dilated_ellipse_contour(C64::new(0.2, 0.4), 0.05, 128, Orientation::Ccw).unwrap();
        assert!(c.integrate(|_| C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((c.winding_number(C64::new(0.0, 0.0)) - 1.0).norm() < 1e-12);
    }
}
