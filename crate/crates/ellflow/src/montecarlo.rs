//! Finite-N checks: the averaged squared norm `tr_N e^{t(gX*−1)}e^{t(gX−1)}`
//! for sampled matrices, empirical spectra, and replica studies compared
//! against the deterministic predictions.
//!
//! Averaging `‖u_t‖²` over initial conditions uniform on the unit sphere is
//! done exactly, through the normalized trace, so the only randomness left is
//! that of X.

use std::collections::HashMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::decay_series;
use crate::ensemble::{replica_seed, sample_elliptic, sample_elliptic_type, CorrelationProfile, EllipticParams, SampledMatrix};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, frobenius_sq, C64};
use crate::quadrature::{decay_curve, ContourConfig};
use crate::reduce::ReducedProfile;

/// Relative mismatch between the propagated and the directly computed
/// `e^{t_max(gX−1)}` above which every time is recomputed directly.
pub const PROPAGATION_GUARD: f64 = 1e-8;

fn generator(x: &Array2<C64>, g: f64) -> Array2<C64> {
    let mut a = x.mapv(|z| z * g);
    for i in 0..a.nrows() {
        a[[i, i]] -= 1.0;
    }
    a
}

/// `tr_N e^{t(gX*−1)}e^{t(gX−1)} = ‖e^{t(gX−1)}‖²_F / N` at each time.
///
/// The propagator is advanced from time to time by exponentials of the
/// increments (cached per distinct increment, so uniform grids cost one
/// exponential). The result at the largest time is compared with a direct
/// exponential; if they differ by more than [`PROPAGATION_GUARD`] every time
/// is recomputed directly.
pub fn evolve_norm(x: &SampledMatrix, g: f64, times: &[f64]) -> Result<Vec<f64>> {
    let n = x.x.nrows();
    if n == 0 || x.x.ncols() != n {
        return Err(Error::InvalidInput("matrix must be square and nonempty".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("times must be finite and nonnegative".into()));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let a = generator(&x.x, g);
    let nf = n as f64;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
    let mut out = vec![0.0; times.len()];
    let mut cache: HashMap<u64, Array2<C64>> = HashMap::new();
    let mut current = Array2::<C64>::eye(n);
    let mut t_cur = 0.0;
    for &idx in &order {
        let dt = times[idx] - t_cur;
        if dt > 0.0 {
            let step = match cache.get(&dt.to_bits()) {
                Some(m) => m.clone(),
                None => {
                    let m = expm(&a.mapv(|z| z * dt))?;
                    cache.insert(dt.to_bits(), m.clone());
                    m
                }
            };
            current = step.dot(&current);
            t_cur = times[idx];
        }
        out[idx] = frobenius_sq(&current) / nf;
    }
    if t_cur > 0.0 {
        let direct = expm(&a.mapv(|z| z * t_cur))?;
        let diff = frobenius_sq(&(&direct - &current)).sqrt();
        let scale = frobenius_sq(&direct).sqrt();
        if diff > PROPAGATION_GUARD * scale {
            log::warn!("propagated exponential drifted by {:.3e}; recomputing per time", diff / scale);
            for (idx, &t) in times.iter().enumerate() {
                out[idx] = if t == 0.0 { 1.0 } else { frobenius_sq(&expm(&a.mapv(|z| z * t))?) / nf };
            }
        }
    }
    Ok(out)
}

/// All eigenvalues of a sampled matrix.
pub fn empirical_spectrum(x: &SampledMatrix) -> Result<Vec<C64>> {
    eigenvalues(&x.x)
}

/// What a study samples.
#[derive(Debug, Clone, PartialEq)]
pub enum McSource {
    /// The elliptic ensemble.
    Elliptic(EllipticParams),
    /// A general elliptic-type profile (Gaussian entries).
    Profile(CorrelationProfile),
}

impl McSource {
    /// Matrix dimension.
    pub fn n(&self) -> usize {
        match self {
            McSource::Elliptic(e) => e.n,
            McSource::Profile(p) => p.n,
        }
    }

    fn sample(&self, seed: u64) -> Result<SampledMatrix> {
        match self {
            McSource::Elliptic(e) => sample_elliptic(e, seed),
            McSource::Profile(p) => sample_elliptic_type(p, seed),
        }
    }

    /// Correlation ρ when the source is a constant profile (of unit variance
    /// sum), for which the Bessel series gives the reference.
    fn constant_rho(&self) -> Option<C64> {
        match self {
            McSource::Elliptic(e) => Some(e.rho),
            McSource::Profile(p) => {
                let red = ReducedProfile::new(p);
                (red.k() == 1 && (red.s_hat[[0, 0]] - 1.0).abs() < 1e-12).then(|| red.t_hat[[0, 0]])
            }
        }
    }
}

/// A replica study.
#[derive(Debug, Clone, PartialEq)]
pub struct McStudy {
    /// Ensemble sampled.
    pub source: McSource,
    /// Coupling g.
    pub g: f64,
    /// Ascending, nonnegative times.
    pub times: Vec<f64>,
    /// Number of replicas (at least two).
    pub replicas: usize,
    /// Base seed; replica r uses `replica_seed(base_seed, r)`.
    pub base_seed: u64,
    /// Keep every replica's eigenvalues.
    pub keep_spectra: bool,
}

/// Outcome of a replica study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// Times.
    pub times: Vec<f64>,
    /// Replica mean of `tr_N e^{t(gX*−1)}e^{t(gX−1)}`.
    pub mean: Vec<f64>,
    /// Standard error of the mean.
    pub stderr: Vec<f64>,
    /// Deterministic prediction.
    pub reference: Vec<f64>,
    /// `(mean − reference)/stderr`.
    pub z: Vec<f64>,
    /// Per-replica eigenvalues, when requested.
    pub spectra: Option<Vec<Vec<C64>>>,
    /// Number of replicas that completed.
    pub replicas_ok: usize,
    /// Replicas that failed, with the reason.
    pub failures: Vec<(usize, String)>,
}

struct ReplicaOutput {
    norms: Vec<f64>,
    spectrum: Option<Vec<C64>>,
}

fn validate_study(study: &McStudy) -> Result<()> {
    if study.replicas < 2 {
        return Err(Error::InvalidInput("a study needs at least two replicas".into()));
    }
    if study.times.is_empty() || study.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidInput("times must be nonempty, finite and nonnegative".into()));
    }
    if study.times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("times must be sorted ascending".into()));
    }
    if !(study.g > 0.0) || !study.g.is_finite() {
        return Err(Error::InvalidInput("coupling g must be positive".into()));
    }
    if let McSource::Elliptic(e) = &study.source {
        if !(e.rho.norm() < 1.0) {
            return Err(Error::InvalidInput(format!("|ρ| = {} must be below one", e.rho.norm())));
        }
        if e.n == 0 {
            return Err(Error::InvalidInput("N must be positive".into()));
        }
    }
    Ok(())
}

/// Deterministic prediction for the study's ensemble: the Bessel series for
/// constant profiles, the double-contour quadrature otherwise.
pub fn reference_curve(source: &McSource, g: f64, times: &[f64]) -> Result<Vec<f64>> {
    match (source.constant_rho(), source) {
        (Some(rho), _) => times.iter().map(|&t| decay_series(rho, g, t, 1e-14).map(|r| r.value)).collect(),
        (None, McSource::Profile(p)) => Ok(decay_curve(p, g, times, &ContourConfig::default())?.deterministic),
        (None, McSource::Elliptic(_)) => unreachable!("elliptic sources always have a constant ρ"),
    }
}

/// Samples the replicas in parallel, evolves each and aggregates.
///
/// Replica results are reduced in replica order, so the output does not
/// depend on the number of worker threads. A failing replica is recorded in
/// `failures` and left out of the averages; fewer than two successes is an
/// error.
pub fn run_study(study: &McStudy) -> Result<McResult> {
    validate_study(study)?;
    let outputs: Vec<Result<ReplicaOutput>> = (0..study.replicas)
        .into_par_iter()
        .map(|r| {
            let x = study.source.sample(replica_seed(study.base_seed, r as u64))?;
            let norms = evolve_norm(&x, study.g, &study.times)?;
            let spectrum = if study.keep_spectra { Some(empirical_spectrum(&x)?) } else { None };
            Ok(ReplicaOutput { norms, spectrum })
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (r, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => ok.push(o),
            Err(e) => {
                log::warn!("replica {r} failed: {e}");
                failures.push((r, e.to_string()));
            }
        }
    }
    if ok.len() < 2 {
        return Err(Error::NoConvergence { what: "Monte Carlo replicas", residual: ok.len() as f64 });
    }
    let m = ok.len() as f64;
    let nt = study.times.len();
    let mut mean = vec![0.0; nt];
    let mut stderr = vec![0.0; nt];
    for j in 0..nt {
        let mu = ok.iter().map(|o| o.norms[j]).sum::<f64>() / m;
        let var = ok.iter().map(|o| (o.norms[j] - mu).powi(2)).sum::<f64>() / (m - 1.0);
        mean[j] = mu;
        stderr[j] = (var / m).sqrt();
    }
    let reference = reference_curve(&study.source, study.g, &study.times)?;
    let z = (0..nt)
        .map(|j| {
            let d = mean[j] - reference[j];
            if stderr[j] > 0.0 {
                d / stderr[j]
            } else if d.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY.copysign(d)
            }
        })
        .collect();
    let spectra = study.keep_spectra.then(|| ok.iter().map(|o| o.spectrum.clone().unwrap_or_default()).collect());
    Ok(McResult { times: study.times.clone(), mean, stderr, reference, z, spectra, replicas_ok: ok.len(), failures })
}
