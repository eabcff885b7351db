//! The two-resolvent kernel `K(ζ₁, ζ₂)` and the singularity data at ζ*.
//!
//! The kernel is `⟨(𝔇⁻¹_{𝔟₁𝔟̄₂} − S)⁻¹1⟩`, the normalized entry sum of the
//! inverse; it is computed by one linear solve. At the rightmost point ζ*
//! the matrix `L = 𝔇_𝔟⁻² − S` becomes singular, and its Perron pair together
//! with the derivatives of 𝔟 fixes the amplitude A(S, T) of the critical
//! `t^{−1/2}` decay law.
//!
//! Left vectors never need to be formed at full size: for a profile with
//! repeated rows the right null vector of `L` is constant on classes, and the
//! left one enters only through its class sums, which form the left null
//! vector of the compressed matrix (see [`crate::reduce`]).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dyson::{derivative, newton, solve_b, DEFAULT_TOL};
use crate::ensemble::CorrelationProfile;
use crate::error::{Error, Result};
use crate::geometry::zeta_star_reduced;
use crate::linalg::{min_singular_value, perron_power, solve, solve_real, C64};
use crate::reduce::ReducedProfile;

/// Relative singular-value threshold below which the kernel matrix is
/// declared numerically singular.
pub const NEAR_SINGULAR_REL: f64 = 1e-10;
/// `|1 − 𝔟₁𝔟̄₂|` below which the closed-form kernel reports pole contact.
pub const POLE_CONTACT: f64 = 1e-12;

/// One kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    /// First spectral parameter.
    pub zeta1: C64,
    /// Second spectral parameter.
    pub zeta2: C64,
    /// `K(ζ₁, ζ₂)`.
    pub value: C64,
    /// Smallest singular value of `𝔇⁻¹_{𝔟₁𝔟̄₂} − S`.
    pub min_sing: f64,
}

fn ones(n: usize) -> Array1<C64> {
    Array1::from_elem(n, C64::new(1.0, 0.0))
}

/// `K` on a reduced profile from class vectors of `𝔟(ζ₁)` and `𝔟(ζ₂)`.
pub(crate) fn kernel_reduced(b1: &Array1<C64>, b2: &Array1<C64>, red: &ReducedProfile) -> Result<C64> {
    let k = red.k();
    let mut m = red.s_hat.mapv(|v| C64::new(-v, 0.0));
    for c in 0..k {
        m[[c, c]] += C64::new(1.0, 0.0) / (b1[c] * b2[c].conj());
    }
    let y = solve(&m, &ones(k)).map_err(|_| Error::NearSingular { min_sing: 0.0 })?;
    Ok(red.mean(&y))
}

fn require_member(zeta: C64, p: &CorrelationProfile) -> Result<crate::dyson::PseudoResolvent> {
    let pr = solve_b(zeta, p, DEFAULT_TOL)?;
    if !pr.member {
        return Err(Error::NonMember { zeta, last_valid: zeta });
    }
    Ok(pr)
}

/// `K(ζ₁, ζ₂) = ⟨(𝔇⁻¹_{𝔟₁𝔟̄₂} − S)⁻¹1⟩` for a general profile.
///
/// Both points must belong to the resolvent set. The smallest singular value
/// of the full N×N matrix is reported for conditioning; the solve itself runs
/// on the row-compressed system, which is exact.
pub fn kernel_general(zeta1: C64, zeta2: C64, p: &CorrelationProfile) -> Result<KernelEval> {
    let pr1 = require_member(zeta1, p)?;
    let pr2 = require_member(zeta2, p)?;
    let n = p.n;
    let mut m = p.s.mapv(|v| C64::new(-v, 0.0));
    let mut inv_norm: f64 = 0.0;
    for i in 0..n {
        let d = C64::new(1.0, 0.0) / (pr1.b[i] * pr2.b[i].conj());
        inv_norm = inv_norm.max(d.norm());
        m[[i, i]] += d;
    }
    let min_sing = min_singular_value(&m)?;
    if min_sing < NEAR_SINGULAR_REL * inv_norm {
        return Err(Error::NearSingular { min_sing });
    }
    let red = ReducedProfile::new(p);
    let value = kernel_reduced(&red.restrict(&pr1.b), &red.restrict(&pr2.b), &red)?;
    Ok(KernelEval { zeta1, zeta2, value, min_sing })
}

/// Closed-form kernel of the elliptic ensemble, `𝔟₁𝔟̄₂/(1 − 𝔟₁𝔟̄₂)`.
pub fn kernel_elliptic(zeta1: C64, zeta2: C64, rho: C64) -> Result<C64> {
    let b1 = crate::dyson::solve_b_elliptic(zeta1, rho)?;
    let b2 = crate::dyson::solve_b_elliptic(zeta2, rho)?;
    let beta = b1 * b2.conj();
    let gap = (C64::new(1.0, 0.0) - beta).norm();
    if gap < POLE_CONTACT {
        return Err(Error::PoleContact { gap });
    }
    Ok(beta / (C64::new(1.0, 0.0) - beta))
}

/// Kernel of an independent-entry profile (`T = 0`, so `𝔟 = −1/ζ`):
/// `⟨(ζ₁ζ̄₂ − S)⁻¹1⟩`.
pub fn kernel_independent(zeta1: C64, zeta2: C64, s: &Array2<f64>) -> Result<C64> {
    let n = s.nrows();
    if n == 0 || s.ncols() != n {
        return Err(Error::InvalidInput("S must be square and nonempty".into()));
    }
    let w = zeta1 * zeta2.conj();
    let r = crate::dyson::perron_root(s);
    if !(w.norm() > r) {
        return Err(Error::InvalidInput(format!("|ζ₁ζ̄₂| = {} must exceed r(S) = {r}", w.norm())));
    }
    let mut m = s.mapv(|v| C64::new(-v, 0.0));
    for i in 0..n {
        m[[i, i]] += w;
    }
    let min_sing = min_singular_value(&m)?;
    if min_sing < NEAR_SINGULAR_REL * w.norm().recip() {
        return Err(Error::NearSingular { min_sing });
    }
    let y = solve(&m, &ones(n))?;
    Ok(y.sum() / n as f64)
}

/// Whether the sparsity pattern of a nonnegative matrix is primitive.
///
/// Squares the boolean pattern until the exponent passes Wielandt's bound
/// `(n−1)² + 1`; a primitive pattern is then entry-wise positive, and no power
/// of an imprimitive one ever is.
pub fn is_primitive(m: &Array2<f64>) -> bool {
    let n = m.nrows();
    let mut pat: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| m[[i, j]] > 0.0).collect()).collect();
    let bound = (n - 1) * (n - 1) + 1;
    let mut exponent = 1usize;
    while exponent < bound {
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if pat[i][k] {
                    for j in 0..n {
                        next[i][j] |= pat[k][j];
                    }
                }
            }
        }
        pat = next;
        exponent *= 2;
        if pat.iter().all(|r| r.iter().all(|&b| b)) {
            return true;
        }
    }
    pat.iter().all(|r| r.iter().all(|&b| b))
}

/// Perron eigenvalue and raw right/left eigenvectors of a primitive matrix.
fn perron_raw(m: &Array2<f64>) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    if !is_primitive(m) {
        return Err(Error::NotPrimitive);
    }
    let right = perron_power(m, 1e-14, 200_000);
    let mt = m.t().to_owned();
    let left = perron_power(&mt, 1e-14, 200_000);
    if !right.converged || !left.converged {
        return Err(Error::NoConvergence { what: "Perron power iteration", residual: f64::NAN });
    }
    Ok((right.radius, right.vector, left.vector))
}

/// Left and right Perron vectors of a primitive nonnegative matrix.
///
/// Returns `(v_l, v_r, radius)` with both vectors positive, `⟨v_r, v_r⟩ = 1`
/// and `⟨v_l, v_r⟩ = 1` for the averaged inner product `⟨x, y⟩ = N⁻¹Σx_i y_i`;
/// the radius is the two-sided Rayleigh quotient `⟨v_l, m v_r⟩/⟨v_l, v_r⟩`.
pub fn perron_pair(m: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>, f64)> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n || m.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("need a square, finite, nonnegative matrix".into()));
    }
    let (_, mut vr, mut vl) = perron_raw(m)?;
    let nf = n as f64;
    vr /= (vr.dot(&vr) / nf).sqrt();
    vl /= vl.dot(&vr) / nf;
    let radius = vl.dot(&m.dot(&vr)) / vl.dot(&vr);
    Ok((vl, vr, radius))
}

/// Data of the kernel singularity at ζ* for a nonnegative profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityData {
    /// The rightmost real point ζ*.
    pub zeta_star: f64,
    /// 𝔟(ζ*), real and negative.
    pub b_star: Vec<f64>,
    /// Left null vector of `L = 𝔇_𝔟⁻² − S`, positive, `⟨v_l, v_r⟩ = 1`.
    pub v_l: Vec<f64>,
    /// Right null vector of `L`, positive, `⟨v_r, v_r⟩ = 1`.
    pub v_r: Vec<f64>,
    /// `∂̄₂λ` at `(ζ*, ζ*)`; equal to `∂₁λ` by symmetry.
    pub d2_lambda: f64,
    /// `∂₁²λ` at `(ζ*, ζ*)`.
    pub lambda_11: f64,
    /// `∂₁∂̄₂λ` at `(ζ*, ζ*)`.
    pub lambda_12: f64,
    /// `∂z̄₂` of the implicit solution of `λ(ζ₁, ζ̄₂) = 0` (always −1).
    pub dz2: f64,
    /// `∂²z̄₂` of the same implicit solution.
    pub d2z2: f64,
    /// `‖F‖` for `F = 𝔇_{|𝔟|}T𝔇_{|𝔟|}`; below one in the non-Hermitian regime.
    pub f_norm: f64,
    /// A(S, T) from the closed expression with `x = (1 − F)⁻¹|𝔟|`.
    pub a_coeff: f64,
    /// A(S, T) from the eigenvalue-perturbation expression.
    pub a_coeff_perturbative: f64,
    /// `|a_coeff_perturbative − a_coeff| / a_coeff`.
    pub a_discrepancy: f64,
}

/// `⟨ℓ, x⟩ = Σ_c ℓ_c x_c` with the left class measure ℓ.
fn pair(l: &Array1<f64>, x: &Array1<f64>) -> f64 {
    l.dot(x)
}

/// Solves the bordered system `[L̂ v_r; ℓᵀ 0][u; μ] = [f; 0]`, i.e. applies the
/// reduced inverse of `L̂` on the complement of its null space.
fn reduced_inverse(lhat: &Array2<f64>, vr: &Array1<f64>, l: &Array1<f64>, f: &Array1<f64>) -> Result<Array1<f64>> {
    let k = lhat.nrows();
    let mut bord = Array2::<f64>::zeros((k + 1, k + 1));
    for i in 0..k {
        for j in 0..k {
            bord[[i, j]] = lhat[[i, j]];
        }
        bord[[i, k]] = vr[i];
        bord[[k, i]] = l[i];
    }
    let mut rhs = Array1::<f64>::zeros(k + 1);
    for i in 0..k {
        rhs[i] = f[i];
    }
    let sol = solve_real(&bord, &rhs)?;
    Ok(sol.slice(ndarray::s![..k]).to_owned())
}

/// Computes ζ*, 𝔟(ζ*), the Perron pair of `L` and the coefficient A(S, T).
///
/// `tol` bounds `|r(𝔇_{𝔟²}S) − 1|` at the returned ζ*. Both expressions of
/// A(S, T) are evaluated: the eigenvalue-perturbation form
/// `⟨v_l⟩⟨v_r⟩/(∂̄₂λ·⟨v_l, v_r⟩·√∂²z̄₂)` and the closed form
/// `⟨v_l⟩⟨v_r⟩/(⟨v_l, v_r⟩·√(2⟨v_l v_r/|𝔟|², (1+F)(1−F)⁻¹x²⟩⟨v_l v_r x/|𝔟|²⟩))`.
/// The closed form is returned as `a_coeff` and their relative difference as
/// `a_discrepancy`.
pub fn coefficient_a(p: &CorrelationProfile, tol: f64) -> Result<SingularityData> {
    if !p.t_is_nonnegative() {
        return Err(Error::NotApplicable("A(S, T) requires entry-wise nonnegative T".into()));
    }
    let red = ReducedProfile::new(p);
    let zs = zeta_star_reduced(p, &red, tol)?;
    singularity_from(p, &red, zs.zeta_star, &zs.b)
}

pub(crate) fn singularity_from(
    p: &CorrelationProfile,
    red: &ReducedProfile,
    zeta_star: f64,
    b_c: &Array1<C64>,
) -> Result<SingularityData> {
    let k = red.k();
    let n = p.n as f64;
    let w = red.weights();
    let b: Array1<f64> = b_c.mapv(|z| z.re);
    let babs = b.mapv(f64::abs);
    let t_hat: Array2<f64> = red.t_hat.mapv(|z| z.re);
    // Perron pair of 𝔇_{𝔟²}Ŝ: its right vector is the null vector of L̂, and
    // left vector u gives the class sums W = 𝔟²u of the full left null vector.
    let mut m = red.s_hat.clone();
    for c in 0..k {
        for j in 0..k {
            m[[c, j]] *= b[c] * b[c];
        }
    }
    let (_, mut vr, u) = if k == 1 {
        (m[[0, 0]], Array1::from_elem(1, 1.0), Array1::from_elem(1, 1.0))
    } else {
        perron_raw(&m)?
    };
    vr /= (w.dot(&(&vr * &vr))).sqrt();
    let mut ell: Array1<f64> = &b * &b * &u / n;
    ell /= pair(&ell, &vr);

    // 𝔟′ = (𝔇⁻² − T)⁻¹1 and 𝔟″ = 2(𝔇⁻² − T)⁻¹(𝔟′²/𝔟³).
    let db_c = derivative(C64::new(zeta_star, 0.0), b_c, &red.t_hat)?;
    let db: Array1<f64> = db_c.mapv(|z| z.re);
    let mut jac = t_hat.mapv(|v| -v);
    for c in 0..k {
        jac[[c, c]] += 1.0 / (b[c] * b[c]);
    }
    let rhs: Array1<f64> = (0..k).map(|c| 2.0 * db[c] * db[c] / b[c].powi(3)).collect();
    let d2b = solve_real(&jac, &rhs)?;

    // Diagonal derivatives of L(ζ₁, ζ̄₂) = 𝔇⁻¹_{𝔟₁𝔟̄₂} − S at (ζ*, ζ*).
    let d1: Array1<f64> = (0..k).map(|c| -db[c] / b[c].powi(3)).collect();
    let d11: Array1<f64> = (0..k).map(|c| (2.0 * db[c] * db[c] - b[c] * d2b[c]) / b[c].powi(4)).collect();
    let d12: Array1<f64> = (0..k).map(|c| db[c] * db[c] / b[c].powi(4)).collect();

    let mut lhat = red.s_hat.mapv(|v| -v);
    for c in 0..k {
        lhat[[c, c]] += 1.0 / (b[c] * b[c]);
    }
    let d2_lambda = pair(&ell, &(&d1 * &vr));
    let cross = {
        let f = &d1 * &vr;
        let g = reduced_inverse(&lhat, &vr, &ell, &f)?;
        pair(&ell, &(&d1 * &g))
    };
    let lambda_11 = pair(&ell, &(&d11 * &vr)) - 2.0 * cross;
    let lambda_12 = pair(&ell, &(&d12 * &vr)) - 2.0 * cross;
    let d2z2 = 2.0 * (lambda_12 - lambda_11) / d2_lambda;

    let mean_l: f64 = ell.sum();
    let mean_r: f64 = w.dot(&vr);
    let lr = pair(&ell, &vr);
    let a_pert = mean_l * mean_r / (d2_lambda * lr * d2z2.sqrt());

    // Closed form with F = 𝔇_{|𝔟|}T𝔇_{|𝔟|} and x = (1 − F)⁻¹|𝔟|.
    let mut f = t_hat.clone();
    for a in 0..k {
        for c in 0..k {
            f[[a, c]] *= babs[a] * babs[c];
        }
    }
    let mut one_minus_f = f.mapv(|v| -v);
    for c in 0..k {
        one_minus_f[[c, c]] += 1.0;
    }
    let x = solve_real(&one_minus_f, &babs)?;
    let x2 = &x * &x;
    let z = solve_real(&one_minus_f, &x2)?;
    let y = &z + &f.dot(&z);
    let inv_b2 = babs.mapv(|v| 1.0 / (v * v));
    let p1 = pair(&ell, &(&vr * &x * &inv_b2));
    let p2 = pair(&ell, &(&vr * &y * &inv_b2));
    let a_closed = mean_l * mean_r / (lr * (2.0 * p2 * p1).sqrt());
    let a_discrepancy = (a_pert - a_closed).abs() / a_closed.abs();
    if !(a_discrepancy < 1e-8) {
        log::warn!("the two expressions for A(S, T) differ: {a_pert} vs {a_closed}");
    }
    let f_norm = if k == 1 { f[[0, 0]].abs() } else { crate::dyson::perron_root(&f) };

    // Full-size vectors: v_r is class-constant, v_l_j = 𝔟_j² Σ_a W_a s_{r(a), j}.
    let b_full = red.expand(&b);
    let v_r = red.expand(&vr);
    let wsum = &ell * n;
    let mut v_l = Array1::<f64>::zeros(p.n);
    for (a, &r) in red.reps.iter().enumerate() {
        v_l.scaled_add(wsum[a], &p.s.row(r));
    }
    v_l = &v_l * &b_full * &b_full;
    Ok(SingularityData {
        zeta_star,
        b_star: b_full.to_vec(),
        v_l: v_l.to_vec(),
        v_r: v_r.to_vec(),
        d2_lambda,
        lambda_11,
        lambda_12,
        dz2: -1.0,
        d2z2,
        f_norm,
        a_coeff: a_closed,
        a_coeff_perturbative: a_pert,
        a_discrepancy,
    })
}

/// The eigenvalue of `L(ζ₁, ζ̄₂) = 𝔇⁻¹_{𝔟(ζ₁)𝔟̄(ζ₂)} − S` nearest zero, for
/// ζ₁, ζ₂ close to ζ*.
///
/// 𝔟 is continued analytically from 𝔟(ζ*) by Newton's method (the points may
/// lie inside the pseudospectrum, where radial continuation stops), and the
/// eigenvalue is found by inverse iteration seeded with `v_r`.
pub fn tracked_eigenvalue(p: &CorrelationProfile, sd: &SingularityData, zeta1: C64, zeta2: C64) -> Result<C64> {
    let red = ReducedProfile::new(p);
    let b0: Array1<C64> = red.restrict(&Array1::from(sd.b_star.clone())).mapv(|v| C64::new(v, 0.0));
    let (b1, _) = newton(zeta1, &b0, &red.t_hat, 1e-15)?;
    let (b2, _) = newton(zeta2, &b0, &red.t_hat, 1e-15)?;
    let k = red.k();
    let mut l = red.s_hat.mapv(|v| C64::new(-v, 0.0));
    for c in 0..k {
        l[[c, c]] += C64::new(1.0, 0.0) / (b1[c] * b2[c].conj());
    }
    let mut v: Array1<C64> = red.restrict(&Array1::from(sd.v_r.clone())).mapv(|x| C64::new(x, 0.0));
    let mut lambda = C64::new(0.0, 0.0);
    for _ in 0..50 {
        let y = match solve(&l, &v) {
            Ok(y) => y,
            // An exactly singular L means λ = 0 to working precision.
            Err(_) => return Ok(C64::new(0.0, 0.0)),
        };
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v = y / norm;
        let lv = l.dot(&v);
        let num: C64 = v.iter().zip(lv.iter()).map(|(a, b)| a.conj() * b).sum();
        let next = num / v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (next - lambda).norm() <= 1e-16 * (1.0 + next.norm()) {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// 𝔟 continued analytically from 𝔟(ζ*) to a nearby point (possibly inside
/// the pseudospectrum).
pub fn b_near_zeta_star(p: &CorrelationProfile, sd: &SingularityData, zeta: C64) -> Result<Array1<C64>> {
    let red = ReducedProfile::new(p);
    let b0: Array1<C64> = red.restrict(&Array1::from(sd.b_star.clone())).mapv(|v| C64::new(v, 0.0));
    let (b, _) = newton(zeta, &b0, &red.t_hat, 1e-15)?;
    Ok(red.expand(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::constant_profiles;

    #[test]
    fn primitivity_patterns() {
        let full = Array2::from_elem((3, 3), 1.0);
        assert!(is_primitive(&full));
        // A 3-cycle is irreducible but periodic.
        let mut cyc = Array2::<f64>::zeros((3, 3));
        cyc[[0, 1]] = 1.0;
        cyc[[1, 2]] = 1.0;
        cyc[[2, 0]] = 1.0;
        assert!(!is_primitive(&cyc));
        cyc[[0, 0]] = 1.0;
        assert!(is_primitive(&cyc));
    }

    #[test]
    fn constant_profile_amplitude() {
        for &rho in &[0.0, 0.25, 0.5] {
            let p = constant_profiles(4, C64::new(rho, 0.0)).unwrap();
            let sd = coefficient_a(&p, 1e-13).unwrap();
            let expected = (1.0 - rho) * (1.0 - rho) / (2.0 * (1.0 + rho)).sqrt();
            assert!((sd.a_coeff - expected).abs() < 1e-10, "rho = {rho}: {} vs {expected}", sd.a_coeff);
            assert!(sd.a_discrepancy < 1e-12);
        }
    }
}
