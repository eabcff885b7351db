//! Correlation profiles and random-matrix samplers.
//!
//! A [`CorrelationProfile`] stores the variance profile `s_ij = 𝔼|x_ij|²` and
//! the pair-covariance profile `t_ij = 𝔼 x_ij x_ji` of an elliptic-type random
//! matrix. The samplers draw each pair `(x_ij, x_ji)`, `i < j`, independently
//! from a centred bivariate law with exactly those second moments.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Variance and covariance profile of an elliptic-type random matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    /// Dimension N.
    pub n: usize,
    /// Variances `s_ij = 𝔼|x_ij|²`, entry-wise nonnegative.
    pub s: Array2<f64>,
    /// Pair covariances `t_ij = 𝔼 x_ij x_ji`; symmetric by construction.
    pub t: Array2<C64>,
    /// Declared correlation bound: `|t_ij| ≤ rho_bound·√(s_ij s_ji)`.
    pub rho_bound: f64,
}

impl CorrelationProfile {
    /// Builds a profile after structural checks (shape, finiteness, `s ≥ 0`,
    /// `t = tᵀ`). The declared bound is set to the tightest admissible value;
    /// whether it is below one is left to [`validate_profile`].
    pub fn new(s: Array2<f64>, t: Array2<C64>) -> Result<Self> {
        let n = s.nrows();
        if n == 0 || s.ncols() != n || t.dim() != (n, n) {
            return Err(Error::InvalidProfile(format!(
                "S is {:?} and T is {:?}; both must be N×N with N ≥ 1",
                s.dim(),
                t.dim()
            )));
        }
        if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidProfile("S must be finite and entry-wise nonnegative".into()));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("T must be finite".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if t[[i, j]] != t[[j, i]] {
                    return Err(Error::InvalidProfile(format!(
                        "T must be symmetric: t[{i},{j}] = {} but t[{j},{i}] = {}",
                        t[[i, j]],
                        t[[j, i]]
                    )));
                }
            }
        }
        let mut p = CorrelationProfile { n, s, t, rho_bound: 0.0 };
        p.rho_bound = p.tightest_rho();
        Ok(p)
    }

    /// Replaces the declared correlation bound.
    pub fn with_rho_bound(mut self, rho_bound: f64) -> Self {
        self.rho_bound = rho_bound;
        self
    }

    /// Builds a block-constant profile: index `i` belongs to block `b(i)`
    /// (blocks are contiguous with the given sizes) and
    /// `s_ij = s_blocks[b(i), b(j)]`, `t_ij = t_blocks[b(i), b(j)]`.
    pub fn from_blocks(sizes: &[usize], s_blocks: &Array2<f64>, t_blocks: &Array2<C64>) -> Result<Self> {
        let k = sizes.len();
        if s_blocks.dim() != (k, k) || t_blocks.dim() != (k, k) {
            return Err(Error::InvalidProfile("block matrices must be K×K for K block sizes".into()));
        }
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &m)| std::iter::repeat_n(b, m))
            .collect();
        let n = labels.len();
        let s = Array2::from_shape_fn((n, n), |(i, j)| s_blocks[[labels[i], labels[j]]]);
        let t = Array2::from_shape_fn((n, n), |(i, j)| t_blocks[[labels[i], labels[j]]]);
        CorrelationProfile::new(s, t)
    }

    /// Smallest ρ̂ with `|t_ij| ≤ ρ̂·√(s_ij s_ji)` for all `i ≠ j`.
    pub fn tightest_rho(&self) -> f64 {
        let mut rho: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let tij = self.t[[i, j]].norm();
                if tij == 0.0 {
                    continue;
                }
                let denom = (self.s[[i, j]] * self.s[[j, i]]).sqrt();
                rho = rho.max(if denom > 0.0 { tij / denom } else { f64::INFINITY });
            }
        }
        rho
    }

    /// True when every `t_ij` is real and nonnegative.
    pub fn t_is_nonnegative(&self) -> bool {
        self.t.iter().all(|z| z.im == 0.0 && z.re >= 0.0)
    }

    /// True when every `t_ij` is real.
    pub fn t_is_real(&self) -> bool {
        self.t.iter().all(|z| z.im == 0.0)
    }

    /// Serializes to the JSON profile document.
    ///
    /// Constant matrices are written as `{"kind":"constant","value":…}`, all
    /// others as row-major flat arrays; complex values are `[re, im]` pairs.
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "s": real_entries_doc(&self.s),
            "t": complex_entries_doc(&self.t),
            "rho_bound": self.rho_bound,
        })
    }

    /// Parses the JSON profile document written by [`Self::to_json`].
    ///
    /// Besides flat row-major arrays, nested arrays of rows are accepted.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Format("profile must be a JSON object".into()))?;
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("profile field \"n\" must be a positive integer".into()))?
            as usize;
        if n == 0 {
            return Err(Error::Format("profile field \"n\" must be positive".into()));
        }
        let s_entries = parse_entries(obj.get("s").ok_or_else(|| Error::Format("missing field \"s\"".into()))?, n, "s")?;
        let t_entries = parse_entries(obj.get("t").ok_or_else(|| Error::Format("missing field \"t\"".into()))?, n, "t")?;
        if s_entries.iter().any(|z| z.im != 0.0) {
            return Err(Error::Format("entries of \"s\" must be real".into()));
        }
        let s = Array2::from_shape_vec((n, n), s_entries.iter().map(|z| z.re).collect())
            .map_err(|e| Error::Format(e.to_string()))?;
        let t = Array2::from_shape_vec((n, n), t_entries).map_err(|e| Error::Format(e.to_string()))?;
        let mut p = CorrelationProfile::new(s, t)?;
        if let Some(rb) = obj.get("rho_bound") {
            let rb = rb
                .as_f64()
                .ok_or_else(|| Error::Format("\"rho_bound\" must be a number".into()))?;
            p.rho_bound = rb;
        }
        Ok(p)
    }

    /// Reads a JSON profile document from disk.
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text)?;
        Self::from_json(&v)
    }

    /// Writes the JSON profile document to disk.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn real_entries_doc(m: &Array2<f64>) -> Value {
    let first = m[[0, 0]];
    if m.iter().all(|v| *v == first) {
        json!({"kind": "constant", "value": first})
    } else {
        Value::Array(m.iter().map(|v| json!(v)).collect())
    }
}

fn complex_value(z: C64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!([z.re, z.im])
    }
}

fn complex_entries_doc(m: &Array2<C64>) -> Value {
    let first = m[[0, 0]];
    if m.iter().all(|v| *v == first) {
        json!({"kind": "constant", "value": complex_value(first)})
    } else {
        Value::Array(m.iter().map(|z| complex_value(*z)).collect())
    }
}

fn parse_scalar(v: &Value, field: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(C64::new(x, 0.0));
    }
    if let Some(a) = v.as_array() {
        if a.len() == 2 {
            if let (Some(re), Some(im)) = (a[0].as_f64(), a[1].as_f64()) {
                return Ok(C64::new(re, im));
            }
        }
    }
    Err(Error::Format(format!("entry of \"{field}\" must be a number or a [re, im] pair, got {v}")))
}

fn parse_entries(v: &Value, n: usize, field: &str) -> Result<Vec<C64>> {
    if let Some(obj) = v.as_object() {
        match obj.get("kind").and_then(Value::as_str) {
            Some("constant") => {
                let value = obj
                    .get("value")
                    .ok_or_else(|| Error::Format(format!("constant \"{field}\" needs a \"value\"")))?;
                return Ok(vec![parse_scalar(value, field)?; n * n]);
            }
            other => {
                return Err(Error::Format(format!("unknown kind {other:?} for \"{field}\"")));
            }
        }
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Format(format!("\"{field}\" must be an array or a constant descriptor")))?;
    // A nested document has n rows of n entries, a flat one n² scalars. The
    // lengths differ unless n = 1, where a one-element row ([[x]]) is told
    // apart from a complex pair ([[re, im]]) by its length.
    let nested = if n == 1 {
        arr.len() == 1 && arr[0].as_array().is_some_and(|r| r.len() == 1)
    } else {
        arr.len() == n
    };
    if nested {
        if !arr.iter().all(|row| row.as_array().is_some_and(|r| r.len() == n)) {
            return Err(Error::Format(format!("rows of \"{field}\" must each have {n} entries")));
        }
        let mut out = Vec::with_capacity(n * n);
        for row in arr {
            for x in row.as_array().unwrap() {
                out.push(parse_scalar(x, field)?);
            }
        }
        return Ok(out);
    }
    if arr.len() != n * n {
        return Err(Error::Format(format!("\"{field}\" has {} entries, expected {}", arr.len(), n * n)));
    }
    arr.iter().map(|x| parse_scalar(x, field)).collect()
}

/// Report produced by [`validate_profile`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    /// Tightest ρ̂ with `|t_ij| ≤ ρ̂√(s_ij s_ji)` over `i ≠ j`.
    pub rho_hat: f64,
    /// `min_ij N·(S^L)_ij`.
    pub c0_s: f64,
    /// `min_ij N·((SᵀS)^L)_ij`.
    pub c0_sts: f64,
    /// The power `L` used for the primitivity constants.
    pub primitivity_l: usize,
    /// `t` symmetric (always true for a constructed profile).
    pub symmetric: bool,
    /// Every diagonal pair satisfies `|t_ii| ≤ s_ii`, so the diagonal law exists.
    pub diagonal_consistent: bool,
    /// Correlation bound strictly below one.
    pub correlation_ok: bool,
    /// Both primitivity constants strictly positive.
    pub primitivity_ok: bool,
    /// Hölder regularity of the profile is not algorithmically checkable; always false.
    pub holder_checked: bool,
    /// Conjunction of all checks.
    pub passed: bool,
}

/// Checks the correlation bound and the uniform primitivity of `S`.
pub fn validate_profile(p: &CorrelationProfile, primitivity_l: usize) -> ValidationReport {
    let n = p.n;
    let rho_hat = p.tightest_rho();
    let l = primitivity_l.max(1);
    let sts = p.s.t().dot(&p.s);
    let c0 = |m: &Array2<f64>| {
        let mut acc = m.clone();
        for _ in 1..l {
            acc = acc.dot(m);
        }
        n as f64 * acc.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let c0_s = c0(&p.s);
    let c0_sts = c0(&sts);
    let symmetric = (0..n).all(|i| (0..i).all(|j| p.t[[i, j]] == p.t[[j, i]]));
    let diagonal_consistent = (0..n).all(|i| p.t[[i, i]].norm() <= p.s[[i, i]] * (1.0 + 1e-12));
    let correlation_ok = rho_hat < 1.0;
    let primitivity_ok = c0_s > 0.0 && c0_sts > 0.0;
    ValidationReport {
        rho_hat,
        c0_s,
        c0_sts,
        primitivity_l: l,
        symmetric,
        diagonal_consistent,
        correlation_ok,
        primitivity_ok,
        holder_checked: false,
        passed: symmetric && diagonal_consistent && correlation_ok && primitivity_ok,
    }
}

/// The constant (elliptic) profile `s_ij = 1/n`, `t_ij = ρ/n` for all `i, j`.
pub fn constant_profiles(n: usize, rho: C64) -> Result<CorrelationProfile> {
    if n == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if !(rho.norm() < 1.0) {
        return Err(Error::InvalidInput(format!(
            "|ρ| = {} but the deterministic theory needs |ρ| < 1",
            rho.norm()
        )));
    }
    let s = Array2::from_elem((n, n), 1.0 / n as f64);
    let t = Array2::from_elem((n, n), rho / n as f64);
    Ok(CorrelationProfile::new(s, t)?.with_rho_bound(rho.norm()))
}

/// Parameters of the elliptic ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticParams {
    /// Dimension N.
    pub n: usize,
    /// Correlation coefficient ρ, `|ρ| ≤ 1`.
    pub rho: C64,
    /// Gaussian entries when true, bounded Rademacher-type entries otherwise.
    pub gaussian: bool,
}

/// One realization of a random matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    /// The sampled matrix X.
    pub x: Array2<C64>,
    /// Seed the realization was drawn from.
    pub seed: u64,
    /// Identifier of the generating law.
    pub profile_tag: String,
}

/// Sub-seed of replica `replica` derived from `base_seed`.
///
/// Each replica reads the first word of its own ChaCha stream, so replicas are
/// independent and the mapping does not depend on the order of evaluation.
pub fn replica_seed(base_seed: u64, replica: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replica.wrapping_add(1));
    rng.next_u64()
}

/// Draws a unit-variance real variable: standard normal or a random sign.
fn unit_draw<R: Rng>(rng: &mut R, gaussian: bool) -> f64 {
    if gaussian {
        rng.sample(StandardNormal)
    } else if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Draws `z` with `𝔼|z|² = 1` and `𝔼z² = 0`.
fn unit_complex<R: Rng>(rng: &mut R, gaussian: bool) -> C64 {
    let re = unit_draw(rng, gaussian);
    let im = unit_draw(rng, gaussian);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Lower Cholesky factor of the proper covariance of `(x_ij, conj x_ji)`:
/// `[[s_ij, t_ij], [conj t_ij, s_ji]]`. Returns `(l11, l21, l22)`.
///
/// The remaining second moments (`𝔼x_ij²`, `𝔼x_ji²`, `𝔼x_ij conj x_ji`) are set
/// to zero, which is the same as taking the 4×4 real covariance of
/// `(Re x_ij, Im x_ij, Re x_ji, Im x_ji)` that is invariant under a joint
/// phase rotation of the pair.
pub fn pair_cholesky(s_ij: f64, s_ji: f64, t_ij: C64) -> Result<(f64, C64, f64)> {
    let tol = 1e-12 * (s_ij * s_ji).sqrt().max(f64::MIN_POSITIVE);
    if s_ij == 0.0 {
        if t_ij.norm() > tol {
            return Err(Error::InvalidProfile(format!(
                "pair covariance with s_ij = 0 but t_ij = {t_ij} is not positive semidefinite"
            )));
        }
        return Ok((0.0, C64::new(0.0, 0.0), s_ji.sqrt()));
    }
    let l11 = s_ij.sqrt();
    let l21 = t_ij.conj() / l11;
    let rem = s_ji - l21.norm_sqr();
    if rem < -tol {
        return Err(Error::InvalidProfile(format!(
            "pair covariance (s_ij = {s_ij}, s_ji = {s_ji}, t_ij = {t_ij}) is not positive semidefinite"
        )));
    }
    Ok((l11, l21, rem.max(0.0).sqrt()))
}

/// Real Cholesky factor `(a, c, d)` of the (Re, Im) covariance of a diagonal
/// entry with `𝔼|x|² = s` and `𝔼x² = t`: `Re = aξ₁`, `Im = cξ₁ + dξ₂`.
fn diagonal_cholesky(s: f64, t: C64) -> Result<(f64, f64, f64)> {
    let vr = 0.5 * (s + t.re);
    let vi = 0.5 * (s - t.re);
    let cov = 0.5 * t.im;
    let tol = 1e-12 * s.max(f64::MIN_POSITIVE);
    if vr < -tol || vi < -tol {
        return Err(Error::InvalidProfile(format!("diagonal covariance (s = {s}, t = {t}) is not positive semidefinite")));
    }
    let vr = vr.max(0.0);
    if vr == 0.0 {
        if cov.abs() > tol {
            return Err(Error::InvalidProfile(format!("diagonal covariance (s = {s}, t = {t}) is not positive semidefinite")));
        }
        return Ok((0.0, 0.0, vi.max(0.0).sqrt()));
    }
    let a = vr.sqrt();
    let c = cov / a;
    let rem = vi - c * c;
    if rem < -tol {
        return Err(Error::InvalidProfile(format!("diagonal covariance (s = {s}, t = {t}) is not positive semidefinite")));
    }
    Ok((a, c, rem.max(0.0).sqrt()))
}

/// Shared sampler: visits the upper triangle row by row, drawing the diagonal
/// entry (two unit draws) or the pair `(x_ij, x_ji)` (four unit draws).
fn sample_with<S, T>(n: usize, seed: u64, gaussian: bool, s: S, t: T) -> Result<Array2<C64>>
where
    S: Fn(usize, usize) -> f64,
    T: Fn(usize, usize) -> C64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let (a, c, d) = diagonal_cholesky(s(i, i), t(i, i))?;
        let xi1 = unit_draw(&mut rng, gaussian);
        let xi2 = unit_draw(&mut rng, gaussian);
        x[[i, i]] = C64::new(a * xi1, c * xi1 + d * xi2);
        for j in (i + 1)..n {
            let (l11, l21, l22) = pair_cholesky(s(i, j), s(j, i), t(i, j))?;
            let z1 = unit_complex(&mut rng, gaussian);
            let z2 = unit_complex(&mut rng, gaussian);
            let u = z1 * l11;
            let w = l21 * z1 + z2 * l22;
            x[[i, j]] = u;
            x[[j, i]] = w.conj();
        }
    }
    Ok(x)
}

/// Samples the elliptic ensemble: `𝔼|x_ij|² = 1/n`, `𝔼x_ij x_ji = ρ/n`.
///
/// Diagonal entries have `𝔼|x_ii|² = 1/n` and `𝔼x_ii² = ρ/n`, i.e. the
/// diagonal obeys the same pair law with itself; for ρ = 1 this makes the
/// Gaussian realization Hermitian up to rounding.
pub fn sample_elliptic(params: &EllipticParams, seed: u64) -> Result<SampledMatrix> {
    if params.n == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if params.rho.norm() > 1.0 + 1e-15 {
        return Err(Error::InvalidInput(format!("|ρ| = {} exceeds one", params.rho.norm())));
    }
    let inv_n = 1.0 / params.n as f64;
    let t = params.rho * inv_n;
    let x = sample_with(params.n, seed, params.gaussian, |_, _| inv_n, |_, _| t)?;
    Ok(SampledMatrix {
        x,
        seed,
        profile_tag: format!(
            "elliptic(n={}, rho={}{:+}i, {})",
            params.n,
            params.rho.re,
            params.rho.im,
            if params.gaussian { "gaussian" } else { "bernoulli" }
        ),
    })
}

/// Samples an elliptic-type matrix with Gaussian pairs.
pub fn sample_elliptic_type(p: &CorrelationProfile, seed: u64) -> Result<SampledMatrix> {
    sample_elliptic_type_with(p, seed, true)
}

/// Samples an elliptic-type matrix, Gaussian or Rademacher-type.
pub fn sample_elliptic_type_with(p: &CorrelationProfile, seed: u64, gaussian: bool) -> Result<SampledMatrix> {
    let x = sample_with(p.n, seed, gaussian, |i, j| p.s[[i, j]], |i, j| p.t[[i, j]])?;
    Ok(SampledMatrix {
        x,
        seed,
        profile_tag: format!("profile(n={}, rho_bound={})", p.n, p.rho_bound),
    })
}

const MATRIX_MAGIC: &[u8; 4] = b"ELXM";

/// Writes `x` as: magic `ELXM`, little-endian `u32` dimension, then `n²`
/// complex doubles (real, imaginary) in row-major order.
pub fn write_matrix_binary(path: &Path, x: &Array2<C64>) -> Result<()> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::InvalidInput("only square matrices can be exported".into()));
    }
    let n32 = u32::try_from(n).map_err(|_| Error::InvalidInput("dimension exceeds u32".into()))?;
    let mut buf = Vec::with_capacity(8 + 16 * n * n);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&n32.to_le_bytes());
    for z in x.iter() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix_binary`].
pub fn read_matrix_binary(path: &Path) -> Result<Array2<C64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::Format("missing ELXM header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 16 * n * n {
        return Err(Error::Format(format!(
            "file holds {} payload bytes, expected {} for n = {n}",
            bytes.len() - 8,
            16 * n * n
        )));
    }
    let data: Vec<C64> = bytes[8..]
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Array2::from_shape_vec((n, n), data).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_factor_reproduces_covariance_at_n2() {
        // At n = 2 the construction must give 𝔼x₁₂x₂₁ = ρ/2 exactly.
        let rho = C64::new(0.3, -0.4);
        let (l11, l21, l22) = pair_cholesky(0.5, 0.5, rho * 0.5).unwrap();
        let e_x12_x21 = l11 * l21.conj();
        // Equalities hold up to the rounding of √0.5.
        assert!((e_x12_x21 - rho * 0.5).norm() < 1e-15);
        assert!((l21.norm_sqr() + l22 * l22 - 0.5).abs() < 1e-15);
        assert!((l11 * l11 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_pairs() {
        assert!(pair_cholesky(1.0, 1.0, C64::new(1.1, 0.0)).is_err());
        assert!(pair_cholesky(0.0, 1.0, C64::new(0.1, 0.0)).is_err());
        assert!(diagonal_cholesky(1.0, C64::new(0.0, 1.2)).is_err());
    }

    #[test]
    fn nested_and_flat_documents_agree() {
        let flat = json!({"n": 2, "s": [0.1, 0.2, 0.3, 0.4], "t": [0.0, [0.1, 0.1], [0.1, 0.1], 0.0]});
        let nested = json!({"n": 2, "s": [[0.1, 0.2], [0.3, 0.4]], "t": [[0.0, [0.1, 0.1]], [[0.1, 0.1], 0.0]]});
        let a = CorrelationProfile::from_json(&flat).unwrap();
        let b = CorrelationProfile::from_json(&nested).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.s[[1, 0]], 0.3);
        assert_eq!(a.t[[0, 1]], C64::new(0.1, 0.1));
    }
}
