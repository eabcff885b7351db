//! Implementations of the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use ellflow::acceptance::{self, Tier};
use ellflow::bessel::{critical_coupling, decay_asymptotic, decay_series, negative_tail_bound};
use ellflow::ensemble::{sample_elliptic_type_with, write_matrix_binary};
use ellflow::geometry::{rasterize_gap, trace_raster, zeta_cap};
use ellflow::{
    constant_profiles, decay_curve, find_zeta_star, kernel_general, run_study, sample_elliptic, solve_b,
    validate_profile, ContourConfig, CorrelationProfile, EllipticParams, McSource, McStudy,
};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::{CliError, CliResult, Command, Coupling, ProfileArgs, RunContext, TierArg};

/// Files written by a command and, for checks that ran to completion but
/// did not pass, the reason.
pub struct Report {
    /// Output file names relative to the output directory.
    pub outputs: Vec<PathBuf>,
    /// Set when the command completed but a check failed.
    pub failure: Option<String>,
}

impl Report {
    fn ok(outputs: Vec<PathBuf>) -> Self {
        Report { outputs, failure: None }
    }
}

/// Runs one command inside the output directory.
pub fn dispatch(ctx: &RunContext, command: &Command) -> CliResult<Report> {
    match command {
        Command::Sample { source, rademacher, out } => sample(ctx, source, *rademacher, out),
        Command::Validate { source, power, out } => validate(ctx, source, *power, out),
        Command::Dyson { source, zetas, tol, out } => dyson(ctx, source, zetas, *tol, out),
        Command::Pseudospectrum { source, level, resolution, out, raster_out } => {
            pseudospectrum(ctx, source, *level, *resolution, out, raster_out)
        }
        Command::Kernel { source, zeta1, zeta2, out } => kernel(ctx, source, zeta1, zeta2, out),
        Command::Decay { source, coupling, grid, epsilon, n_max, rel_tol, out } => {
            let cfg = ContourConfig { epsilon: *epsilon, n_max: *n_max, rel_tol: *rel_tol, ..ContourConfig::default() };
            decay(ctx, source, coupling, &grid.points()?, &cfg, out)
        }
        Command::EllipticDecay { rho, coupling, grid, out } => elliptic_decay(ctx, *rho, coupling, &grid.points()?, out),
        Command::Montecarlo { source, coupling, grid, replicas, rademacher, out, spectrum_out } => {
            let study = Study { coupling, times: grid.points()?, replicas: *replicas, rademacher: *rademacher };
            montecarlo(ctx, source, &study, out, spectrum_out.as_deref())
        }
        Command::Verify { tier, only, out } => verify(ctx, *tier, only, out),
        Command::Replay { .. } => Err(CliError::Input("nested replay".into())),
    }
}

/// The profile described by the arguments.
fn load_profile(source: &ProfileArgs) -> CliResult<CorrelationProfile> {
    match (&source.profile, source.rho, source.n) {
        (Some(path), None, None) => Ok(CorrelationProfile::read_json(path)?),
        (None, Some(rho), Some(n)) => Ok(constant_profiles(n, rho)?),
        _ => Err(CliError::Input("give either --profile FILE or both --rho and --n".into())),
    }
}

/// Elliptic parameters when the source is `--rho`/`--n`.
fn elliptic_params(source: &ProfileArgs, gaussian: bool) -> Option<EllipticParams> {
    match (&source.profile, source.rho, source.n) {
        (None, Some(rho), Some(n)) => Some(EllipticParams { n, rho, gaussian }),
        _ => None,
    }
}

fn profile_coupling(coupling: &Coupling, p: &CorrelationProfile) -> CliResult<f64> {
    match (coupling.g, coupling.critical) {
        (Some(g), false) => Ok(g),
        (None, true) => Ok(1.0 / find_zeta_star(p, 1e-12)?),
        _ => Err(CliError::Input("give either --g or --critical".into())),
    }
}

fn elliptic_coupling(coupling: &Coupling, rho: C64) -> CliResult<f64> {
    match (coupling.g, coupling.critical) {
        (Some(g), false) => Ok(g),
        (None, true) => Ok(critical_coupling(rho)),
        _ => Err(CliError::Input("give either --g or --critical".into())),
    }
}

fn write_json(ctx: &RunContext, name: &Path, v: &Value) -> CliResult<()> {
    fs::write(ctx.path(name), serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn csv_writer(ctx: &RunContext, name: &Path, header: &[&str]) -> CliResult<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(ctx.path(name))?;
    w.write_record(header)?;
    Ok(w)
}

fn write_row(w: &mut csv::Writer<fs::File>, row: &[f64]) -> CliResult<()> {
    w.write_record(row.iter().map(|v| v.to_string()))?;
    Ok(())
}

fn sample(ctx: &RunContext, source: &ProfileArgs, rademacher: bool, out: &Path) -> CliResult<Report> {
    let m = match elliptic_params(source, !rademacher) {
        Some(params) => sample_elliptic(&params, ctx.seed)?,
        None => sample_elliptic_type_with(&load_profile(source)?, ctx.seed, !rademacher)?,
    };
    write_matrix_binary(&ctx.path(out), &m.x)?;
    log::info!("sampled {}×{} matrix ({}) with seed {}", m.x.nrows(), m.x.ncols(), m.profile_tag, m.seed);
    Ok(Report::ok(vec![out.to_path_buf()]))
}

fn validate(ctx: &RunContext, source: &ProfileArgs, power: usize, out: &Path) -> CliResult<Report> {
    let report = validate_profile(&load_profile(source)?, power);
    write_json(ctx, out, &serde_json::to_value(&report)?)?;
    let failure = (!report.passed).then(|| {
        format!(
            "profile fails validation (ρ̂ = {}, correlation ok: {}, primitivity ok: {}, diagonal ok: {})",
            report.rho_hat, report.correlation_ok, report.primitivity_ok, report.diagonal_consistent
        )
    });
    Ok(Report { outputs: vec![out.to_path_buf()], failure })
}

fn dyson(ctx: &RunContext, source: &ProfileArgs, zetas: &[C64], tol: f64, out: &Path) -> CliResult<Report> {
    let p = load_profile(source)?;
    let mut docs = Vec::with_capacity(zetas.len());
    let mut failed = Vec::new();
    for &z in zetas {
        match solve_b(z, &p, tol) {
            Ok(pr) => {
                if !pr.member {
                    failed.push(format!("ζ = {z} is not in the resolvent set (Δ = {:.3e})", pr.delta));
                }
                docs.push(pr.to_json());
            }
            Err(e) if e.is_input_error() => return Err(e.into()),
            Err(e) => {
                failed.push(format!("ζ = {z}: {e}"));
                docs.push(json!({"zeta": [z.re, z.im], "error": e.to_string()}));
            }
        }
    }
    write_json(ctx, out, &Value::Array(docs))?;
    Ok(Report { outputs: vec![out.to_path_buf()], failure: (!failed.is_empty()).then(|| failed.join("; ")) })
}

fn pseudospectrum(
    ctx: &RunContext,
    source: &ProfileArgs,
    level: f64,
    resolution: usize,
    out: &Path,
    raster_out: &Path,
) -> CliResult<Report> {
    let p = load_profile(source)?;
    if !(level > 0.0 && level <= 1.0) {
        return Err(CliError::Input(format!("level {level} must lie in (0, 1]")));
    }
    let zs = if p.t_is_nonnegative() { find_zeta_star(&p, 1e-12).ok() } else { None };
    let raster = rasterize_gap(&p, zs.unwrap_or_else(|| zeta_cap(&p)) + 1.0, resolution)?;
    let mut w = csv_writer(ctx, raster_out, &["re", "im", "delta"])?;
    for (x, y, d) in raster.rows() {
        write_row(&mut w, &[x, y, d])?;
    }
    w.flush()?;
    let dom = trace_raster(&raster, level)?;
    let mut w = csv_writer(ctx, out, &["re", "im"])?;
    for z in &dom.boundary {
        write_row(&mut w, &[z.re, z.im])?;
    }
    w.flush()?;
    if raster.failed_cells > 0 {
        log::warn!("{} raster cells failed and were treated as interior", raster.failed_cells);
    }
    if dom.loops > 1 {
        log::warn!("{} loops found at level {level}; wrote the longest", dom.loops);
    }
    Ok(Report::ok(vec![out.to_path_buf(), raster_out.to_path_buf()]))
}

fn kernel(ctx: &RunContext, source: &ProfileArgs, zeta1: &[C64], zeta2: &[C64], out: &Path) -> CliResult<Report> {
    let p = load_profile(source)?;
    let mut w = csv_writer(ctx, out, &["re1", "im1", "re2", "im2", "reK", "imK", "min_sing"])?;
    for &z1 in zeta1 {
        for &z2 in zeta2 {
            let k = kernel_general(z1, z2, &p)?;
            write_row(&mut w, &[z1.re, z1.im, z2.re, z2.im, k.value.re, k.value.im, k.min_sing])?;
        }
    }
    w.flush()?;
    Ok(Report::ok(vec![out.to_path_buf()]))
}

fn decay(
    ctx: &RunContext,
    source: &ProfileArgs,
    coupling: &Coupling,
    times: &[f64],
    cfg: &ContourConfig,
    out: &Path,
) -> CliResult<Report> {
    let p = load_profile(source)?;
    let g = profile_coupling(coupling, &p)?;
    let curve = decay_curve(&p, g, times, cfg)?;
    let mut w = csv_writer(ctx, out, &["t", "deterministic", "quad_err", "asymptotic"])?;
    for (j, &t) in curve.times.iter().enumerate() {
        write_row(&mut w, &[t, curve.deterministic[j], curve.quad_err[j], curve.asymptotic[j]])?;
    }
    w.flush()?;
    for warning in &curve.warnings {
        log::warn!("{warning}");
    }
    log::info!("g = {g}, {} contour nodes", curve.n_nodes);
    Ok(Report::ok(vec![out.to_path_buf()]))
}

fn elliptic_decay(ctx: &RunContext, rho: C64, coupling: &Coupling, times: &[f64], out: &Path) -> CliResult<Report> {
    if !(rho.norm() < 1.0) {
        return Err(CliError::Input(format!("|ρ| = {} must be below one", rho.norm())));
    }
    let g = elliptic_coupling(coupling, rho)?;
    let mut w = csv_writer(ctx, out, &["t", "series", "asymptotic", "neg_tail_bound"])?;
    for &t in times {
        let series = decay_series(rho, g, t, 1e-15)?.value;
        let (asym, tail) = if t > 0.0 {
            (decay_asymptotic(rho, g, t), (-2.0 * t).exp() * negative_tail_bound(rho, g, t))
        } else {
            (f64::NAN, 0.0)
        };
        write_row(&mut w, &[t, series, asym, tail])?;
    }
    w.flush()?;
    Ok(Report::ok(vec![out.to_path_buf()]))
}

/// Settings of a replica study taken from the command line.
struct Study<'a> {
    coupling: &'a Coupling,
    times: Vec<f64>,
    replicas: usize,
    rademacher: bool,
}

fn montecarlo(
    ctx: &RunContext,
    source: &ProfileArgs,
    study: &Study,
    out: &Path,
    spectrum_out: Option<&Path>,
) -> CliResult<Report> {
    let (mc_source, g) = match elliptic_params(source, !study.rademacher) {
        Some(params) => (McSource::Elliptic(params), elliptic_coupling(study.coupling, params.rho)?),
        None => {
            if study.rademacher {
                return Err(CliError::Input("--rademacher applies to the elliptic ensemble only".into()));
            }
            let p = load_profile(source)?;
            let g = profile_coupling(study.coupling, &p)?;
            (McSource::Profile(p), g)
        }
    };
    let res = run_study(&McStudy {
        source: mc_source,
        g,
        times: study.times.clone(),
        replicas: study.replicas,
        base_seed: ctx.seed,
        keep_spectra: spectrum_out.is_some(),
    })?;
    let mut w = csv_writer(ctx, out, &["t", "mc_mean", "mc_stderr", "reference", "z"])?;
    for (j, &t) in res.times.iter().enumerate() {
        write_row(&mut w, &[t, res.mean[j], res.stderr[j], res.reference[j], res.z[j]])?;
    }
    w.flush()?;
    let mut outputs = vec![out.to_path_buf()];
    if let (Some(name), Some(spectra)) = (spectrum_out, &res.spectra) {
        let mut w = csv_writer(ctx, name, &["replica", "re", "im"])?;
        for (r, ev) in spectra.iter().enumerate() {
            for z in ev {
                w.write_record([r.to_string(), z.re.to_string(), z.im.to_string()])?;
            }
        }
        w.flush()?;
        outputs.push(name.to_path_buf());
    }
    for (r, why) in &res.failures {
        log::warn!("replica {r} failed: {why}");
    }
    Ok(Report::ok(outputs))
}

fn verify(ctx: &RunContext, tier: TierArg, only: &[u8], out: &Path) -> CliResult<Report> {
    let tier = match tier {
        TierArg::Quick => Tier::Quick,
        TierArg::Full => Tier::Full,
    };
    let ids: Vec<u8> = if only.is_empty() { (1..=11).collect() } else { only.to_vec() };
    if let Some(bad) = ids.iter().find(|id| !(1..=11).contains(*id)) {
        return Err(CliError::Input(format!("no check numbered {bad}")));
    }
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let o = acceptance::run(id, tier);
        println!("{}", o.line());
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("\n{:>3}  {:<40} {:>6} {:>9}", "id", "check", "result", "seconds");
    for o in &outcomes {
        println!("{:>3}  {:<40} {:>6} {:>9.1}", o.id, o.name, if o.passed { "PASS" } else { "FAIL" }, o.seconds);
    }
    println!("{passed}/{} checks passed", outcomes.len());
    write_json(ctx, out, &json!({ "tier": tier, "outcomes": outcomes }))?;
    let failure = outcomes.iter().find(|o| !o.passed).map(|o| format!("check {} ({}) failed: {}", o.id, o.name, o.detail));
    Ok(Report { outputs: vec![out.to_path_buf()], failure })
}
