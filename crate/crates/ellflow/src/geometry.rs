//! Shape of the self-consistent pseudospectrum: the closed-form ellipse of
//! the elliptic ensemble, the rightmost real point ζ* for nonnegative `T`,
//! and traced level sets `{Δ_ζ = δ}` for general profiles.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::dyson::{continue_radially, derivative, newton, perron_root, reduced_radius, rho_hat};
use crate::ensemble::CorrelationProfile;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::reduce::ReducedProfile;

/// How a [`SpectralDomain`] boundary was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    /// Exact ellipse of the elliptic ensemble.
    EllipseClosedForm,
    /// Marching-squares contour of a rasterized Δ field.
    TracedLevelSet,
}

/// Boundary of the pseudospectrum (or of one of its Δ-neighbourhoods).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDomain {
    /// Construction method.
    pub kind: DomainKind,
    /// Closed, positively oriented polyline (first point not repeated).
    pub boundary: Vec<C64>,
    /// Rightmost real point of the pseudospectrum, when defined.
    pub zeta_star: Option<f64>,
    /// The Δ level traced (0 for the exact boundary).
    pub level: f64,
    /// Grid spacing of the raster (0 for closed forms).
    pub grid_step: f64,
    /// Raster cells whose Dyson solve failed (classified as interior).
    pub failed_cells: usize,
    /// Number of closed loops found; only the longest is returned.
    pub loops: usize,
}

/// The boundary of the elliptic domain `E_ρ`,
/// `ζ(φ) = e^{iθ/2}(|ρ|e^{iφ} + e^{−iφ})` with `ρ = |ρ|e^{iθ}`.
///
/// Increasing φ runs clockwise, so the points are emitted at
/// `φ_k = −2πk/n` to obtain a positively oriented polyline.
pub fn ellipse_boundary(rho: C64, n_points: usize) -> Result<SpectralDomain> {
    if !(rho.norm() < 1.0) {
        return Err(Error::InvalidInput(format!("|ρ| = {} must be below one", rho.norm())));
    }
    if n_points < 3 {
        return Err(Error::InvalidInput("need at least three boundary points".into()));
    }
    let boundary = (0..n_points)
        .map(|k| ellipse_point(rho, -2.0 * std::f64::consts::PI * k as f64 / n_points as f64))
        .collect();
    Ok(SpectralDomain {
        kind: DomainKind::EllipseClosedForm,
        boundary,
        zeta_star: Some(ellipse_zeta_star(rho)),
        level: 0.0,
        grid_step: 0.0,
        failed_cells: 0,
        loops: 1,
    })
}

/// `e^{iθ/2}(|ρ|e^{iφ} + e^{−iφ})`.
pub(crate) fn ellipse_point(rho: C64, phi: f64) -> C64 {
    let half = C64::from_polar(1.0, rho.arg() / 2.0);
    half * (C64::from_polar(rho.norm(), phi) + C64::from_polar(1.0, -phi))
}

/// `max Re ζ` over `E_ρ`: `√(1 + |ρ|² + 2Re ρ) = |1 + ρ|`.
pub fn ellipse_zeta_star(rho: C64) -> f64 {
    (1.0 + rho.norm_sqr() + 2.0 * rho.re).sqrt()
}

/// Whether ζ lies strictly inside `E_ρ`.
pub fn inside_ellipse(zeta: C64, rho: C64) -> bool {
    // Rotate by e^{−iθ/2}; the semi-axes are then 1+|ρ| (real) and 1−|ρ|.
    let w = zeta * C64::from_polar(1.0, -rho.arg() / 2.0);
    let r = rho.norm();
    (w.re / (1.0 + r)).powi(2) + (w.im / (1.0 - r)).powi(2) < 1.0
}

/// Everything known at the rightmost point ζ*.
#[derive(Debug, Clone)]
pub(crate) struct ZetaStar {
    pub zeta_star: f64,
    /// Class vector of 𝔟(ζ*) on the reduced profile.
    pub b: Array1<C64>,
}

/// `g(x) = r(𝔇_{𝔟(x)²}S) − 1` at a warm-started Newton solution.
fn g_at(x: f64, b_guess: &Array1<C64>, red: &ReducedProfile, tol: f64) -> Option<(f64, Array1<C64>)> {
    let (b, _) = newton(C64::new(x, 0.0), b_guess, &red.t_hat, tol).ok()?;
    Some((reduced_radius(&b, &red.s_hat) - 1.0, b))
}

pub(crate) fn zeta_star_reduced(p: &CorrelationProfile, red: &ReducedProfile, tol: f64) -> Result<ZetaStar> {
    if !p.t_is_nonnegative() {
        return Err(Error::NotApplicable("ζ* is defined for entry-wise nonnegative T only".into()));
    }
    let rs = perron_root(&red.s_hat);
    if !(rs > 0.0) {
        return Err(Error::BracketFailure("r(S) = 0: the pseudospectrum is a point".into()));
    }
    let newton_tol = 1e-14;
    let x_hi0 = 4.0 * (1.0 + rs.sqrt());
    let sol = continue_radially(C64::new(x_hi0, 0.0), red, rho_hat(p), newton_tol, false)
        .map_err(|e| Error::BracketFailure(format!("no solution at the upper bracket {x_hi0}: {e}")))?;
    let mut hi = x_hi0;
    let mut b_hi = sol.b;
    if sol.radius >= 1.0 {
        return Err(Error::BracketFailure(format!("r(𝔇_𝔟²S) ≥ 1 already at {x_hi0}")));
    }
    // March down geometrically, warm-starting Newton with the tangent
    // predictor, until g changes sign or Newton breaks down.
    let x_floor = 1e-6 * x_hi0;
    let mut lo;
    let mut step = 0.05;
    loop {
        let x = hi * (1.0 - step);
        if x < x_floor {
            return Err(Error::BracketFailure(format!("g stayed negative down to ζ = {x_floor:e}")));
        }
        let db = derivative(C64::new(hi, 0.0), &b_hi, &red.t_hat)
            .map_err(|_| Error::BracketFailure("Dyson Jacobian singular on the real axis".into()))?;
        let pred = &b_hi + &(db * C64::new(x - hi, 0.0));
        match g_at(x, &pred, red, newton_tol) {
            Some((g, b)) if g < 0.0 => {
                let jump = (&b - &pred).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if jump > 0.25 * b.iter().map(|z| z.norm()).fold(0.0, f64::max) && step > 1e-8 {
                    step /= 2.0;
                    continue;
                }
                hi = x;
                b_hi = b;
                step = (step * 1.5).min(0.2);
            }
            Some((_, _)) => {
                lo = x;
                break;
            }
            None => {
                if step < 1e-10 {
                    lo = x;
                    break;
                }
                step /= 2.0;
            }
        }
    }
    // Bisection on the sign of g, always continuing from the upper bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let db = derivative(C64::new(hi, 0.0), &b_hi, &red.t_hat).ok();
        let pred = match db {
            Some(db) => &b_hi + &(db * C64::new(mid - hi, 0.0)),
            None => b_hi.clone(),
        };
        match g_at(mid, &pred, red, newton_tol) {
            Some((g, b)) if g < 0.0 || g.abs() <= tol => {
                hi = mid;
                b_hi = b;
                if g.abs() <= tol {
                    break;
                }
            }
            _ => lo = mid,
        }
    }
    // The upper end is the root to within tolerance. The Dyson Jacobian stays
    // invertible at ζ* (only L = 𝔇⁻² − S degenerates), so 𝔟 there is a plain
    // Newton solve.
    let (b_star, _) = newton(C64::new(hi, 0.0), &b_hi, &red.t_hat, newton_tol)?;
    Ok(ZetaStar { zeta_star: hi, b: b_star })
}

/// Rightmost real point ζ* of the pseudospectrum for entry-wise nonnegative
/// `T`: the root of `r(𝔇_{𝔟(ζ)²}S) = 1` on the positive real axis.
///
/// The root is bracketed by marching in from a point far outside (reached by
/// continuation from infinity) and refined by bisection until
/// `|r − 1| ≤ tol` or the bracket reaches machine resolution.
pub fn find_zeta_star(p: &CorrelationProfile, tol: f64) -> Result<f64> {
    let red = ReducedProfile::new(p);
    Ok(zeta_star_reduced(p, &red, tol)?.zeta_star)
}

/// Radius that certainly contains the pseudospectrum for general `T`:
/// `(1 + ρ̂)·√r(S)`.
pub fn zeta_cap(p: &CorrelationProfile) -> f64 {
    let red = ReducedProfile::new(p);
    (1.0 + rho_hat(p).min(1.0)) * perron_root(&red.s_hat).max(0.0).sqrt()
}

/// A square raster of the uncapped stability field `r(𝔇_{|𝔟|²}S)⁻¹ − 1`.
#[derive(Debug, Clone)]
pub struct GapRaster {
    /// Grid abscissae.
    pub xs: Vec<f64>,
    /// Grid ordinates.
    pub ys: Vec<f64>,
    /// `values[[iy, ix]]`; NaN where the Dyson solve failed.
    pub values: Array2<f64>,
    /// Number of failed cells.
    pub failed_cells: usize,
}

impl GapRaster {
    /// Grid spacing.
    pub fn step(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Rows `(re, im, Δ)` with Δ capped at one; failed cells report NaN.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.xs.len() * self.ys.len());
        for (iy, &y) in self.ys.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                out.push((x, y, self.values[[iy, ix]].min(1.0)));
            }
        }
        out
    }
}

/// Evaluates the uncapped gap on a `resolution × resolution` grid covering
/// `[−half_width, half_width]²`.
///
/// Each cell follows the branch from infinity radially without stopping at
/// the boundary, so the field is continuous across `Δ = 0` wherever the
/// analytic continuation exists.
pub fn rasterize_gap(p: &CorrelationProfile, half_width: f64, resolution: usize) -> Result<GapRaster> {
    if resolution < 2 || !(half_width > 0.0) {
        return Err(Error::InvalidInput("need resolution ≥ 2 and a positive half-width".into()));
    }
    let red = ReducedProfile::new(p);
    let rh = rho_hat(p);
    let step = 2.0 * half_width / (resolution - 1) as f64;
    let xs: Vec<f64> = (0..resolution).map(|i| -half_width + step * i as f64).collect();
    let ys = xs.clone();
    let cells: Vec<f64> = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let z = C64::new(xs[idx % resolution], ys[idx / resolution]);
            match continue_radially(z, &red, rh, 1e-12, true) {
                Ok(sol) if sol.radius > 0.0 => 1.0 / sol.radius - 1.0,
                Ok(_) => f64::INFINITY,
                Err(_) => f64::NAN,
            }
        })
        .collect();
    let failed_cells = cells.iter().filter(|v| v.is_nan()).count();
    let values = Array2::from_shape_vec((resolution, resolution), cells).map_err(|e| Error::Linalg(e.to_string()))?;
    Ok(GapRaster { xs, ys, values, failed_cells })
}

/// Traces `{Δ_ζ = level}` by marching squares over a raster of the disk
/// `|ζ| ≤ ζ* + 1` (ζ* for nonnegative `T`, otherwise [`zeta_cap`]).
///
/// `level` may be any value in `(0, 1]`; the raster holds the uncapped field,
/// so `level = 1` traces the locus `r(𝔇_{|𝔟|²}S) = 1/2`. Failed cells count
/// as interior.
pub fn trace_level_set(p: &CorrelationProfile, level: f64, resolution: usize) -> Result<SpectralDomain> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::InvalidInput(format!("level {level} must lie in (0, 1]")));
    }
    if resolution < 32 {
        return Err(Error::InvalidInput("resolution must be at least 32".into()));
    }
    let zs = if p.t_is_nonnegative() { find_zeta_star(p, 1e-12).ok() } else { None };
    let radius = zs.unwrap_or_else(|| zeta_cap(p)) + 1.0;
    let raster = rasterize_gap(p, radius, resolution)?;
    let mut dom = trace_raster(&raster, level)?;
    dom.zeta_star = zs;
    Ok(dom)
}

/// Marching squares on an existing raster.
pub fn trace_raster(raster: &GapRaster, level: f64) -> Result<SpectralDomain> {
    let (ny, nx) = raster.values.dim();
    // Failed cells are interior: map NaN to −∞ so they sit below every level.
    let val = |iy: usize, ix: usize| {
        let v = raster.values[[iy, ix]];
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    let point = |iy: usize, ix: usize| C64::new(raster.xs[ix], raster.ys[iy]);
    // Crossing point on a grid edge, keyed by (orientation, iy, ix): 0 is the
    // horizontal edge (iy,ix)-(iy,ix+1), 1 the vertical (iy,ix)-(iy+1,ix).
    let crossing = |a: (usize, usize), b: (usize, usize)| {
        let (va, vb) = (val(a.0, a.1), val(b.0, b.1));
        let pa = point(a.0, a.1);
        let pb = point(b.0, b.1);
        let s = if va.is_infinite() || vb.is_infinite() {
            0.5
        } else {
            ((level - va) / (vb - va)).clamp(0.0, 1.0)
        };
        pa + (pb - pa) * s
    };
    let mut points: HashMap<(u8, usize, usize), C64> = HashMap::new();
    let mut adjacency: HashMap<(u8, usize, usize), Vec<(u8, usize, usize)>> = HashMap::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let corners = [(iy, ix), (iy, ix + 1), (iy + 1, ix + 1), (iy + 1, ix)];
            let above: Vec<bool> = corners.iter().map(|&(a, b)| val(a, b) >= level).collect();
            // Edges in corner order: bottom, right, top, left.
            let edges = [(0u8, iy, ix), (1u8, iy, ix + 1), (0u8, iy + 1, ix), (1u8, iy, ix)];
            let crossed: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            let pairs: Vec<(usize, usize)> = match crossed.len() {
                2 => vec![(crossed[0], crossed[1])],
                4 => {
                    // Saddle: decide by the cell-centre average.
                    let centre = corners.iter().map(|&(a, b)| val(a, b)).sum::<f64>() / 4.0;
                    if (centre >= level) == above[0] {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => vec![],
            };
            for (e1, e2) in pairs {
                for &e in &[e1, e2] {
                    let key = edges[e];
                    points.entry(key).or_insert_with(|| {
                        let (a, b) = (corners[e], corners[(e + 1) % 4]);
                        crossing(a, b)
                    });
                }
                adjacency.entry(edges[e1]).or_default().push(edges[e2]);
                adjacency.entry(edges[e2]).or_default().push(edges[e1]);
            }
        }
    }
    // Link segments into polylines.
    let mut visited: HashMap<(u8, usize, usize), bool> = HashMap::new();
    let mut keys: Vec<_> = adjacency.keys().cloned().collect();
    keys.sort();
    let mut loops: Vec<Vec<C64>> = Vec::new();
    for start in keys {
        if visited.contains_key(&start) {
            continue;
        }
        let mut path = vec![start];
        visited.insert(start, true);
        let mut prev = start;
        let mut cur = start;
        loop {
            let next = adjacency[&cur].iter().find(|&&k| k != prev && !visited.contains_key(&k)).cloned();
            match next {
                Some(k) => {
                    visited.insert(k, true);
                    path.push(k);
                    prev = cur;
                    cur = k;
                }
                None => break,
            }
        }
        loops.push(path.iter().map(|k| points[k]).collect());
    }
    let n_loops = loops.len();
    let mut best = loops.into_iter().max_by_key(|l| l.len()).unwrap_or_default();
    if signed_area(&best) < 0.0 {
        best.reverse();
    }
    Ok(SpectralDomain {
        kind: DomainKind::TracedLevelSet,
        boundary: best,
        zeta_star: None,
        level,
        grid_step: raster.step(),
        failed_cells: raster.failed_cells,
        loops: n_loops,
    })
}

/// Signed area of a closed polyline (positive for counter-clockwise).
pub fn signed_area(poly: &[C64]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.re * b.im - b.re * a.im
        })
        .sum::<f64>()
        / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::constant_profiles;

    #[test]
    fn ellipse_is_positively_oriented() {
        let d = ellipse_boundary(C64::new(0.5, 0.0), 256).unwrap();
        assert!(signed_area(&d.boundary) > 0.0);
        // Area of the ellipse with semi-axes 1.5 and 0.5.
        assert!((signed_area(&d.boundary) - std::f64::consts::PI * 0.75).abs() < 1e-3);
    }

    #[test]
    fn zeta_star_of_constant_profiles() {
        for &rho in &[0.0, 0.5] {
            let p = constant_profiles(6, C64::new(rho, 0.0)).unwrap();
            let zs = find_zeta_star(&p, 1e-13).unwrap();
            assert!((zs - (1.0 + rho)).abs() < 1e-12, "rho = {rho}: {zs}");
        }
    }
}
