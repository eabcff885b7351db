//! Command-line front end: argument parsing, dispatch, output files and run
//! manifests.
//!
//! Every subcommand writes its files into `--out-dir` together with a
//! `manifest.json` that records the resolved command, the seed and the
//! library version (no timestamps or host data), so that `ellflow replay`
//! reproduces the outputs byte for byte.
//!
//! Exit codes: 0 success, 1 numerical failure (including failed checks),
//! 2 input error, 3 internal error.

mod commands;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for numerical failures and failed checks.
pub const EXIT_NUMERICAL: i32 = 1;
/// Exit code for bad input (arguments, files).
pub const EXIT_INPUT: i32 = 2;
/// Exit code for internal errors.
pub const EXIT_INTERNAL: i32 = 3;

/// Name of the manifest written next to every run's outputs.
pub const MANIFEST: &str = "manifest.json";

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or unreadable/malformed input files.
    #[error("input error: {0}")]
    Input(String),
    /// A computation failed or a check did not pass.
    #[error("{0}")]
    Numerical(String),
    /// Unexpected failure inside the tool.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<ellflow::Error> for CliError {
    fn from(e: ellflow::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Result alias of the CLI.
pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `RE` or `RE,IM` into a complex number.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("`{p}` is not a number: {e}"));
    let z = match parts.as_slice() {
        [re] => C64::new(num(re)?, 0.0),
        [re, im] => C64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected RE or RE,IM, got `{s}`")),
    };
    if z.is_finite() {
        Ok(z)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Spectral and dynamical analysis of elliptic-type random matrices.
#[derive(Debug, Parser)]
#[command(name = "ellflow", version, about)]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving output files and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Subcommand.
    #[command(subcommand)]
    pub command: Command,
}

/// Where a correlation profile comes from.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct ProfileArgs {
    /// Profile JSON file.
    #[arg(long, conflicts_with_all = ["rho", "n"])]
    pub profile: Option<PathBuf>,
    /// Correlation ρ of the constant (elliptic) profile, as RE or RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub rho: Option<C64>,
    /// Dimension of the constant profile.
    #[arg(long)]
    pub n: Option<usize>,
}

/// A uniform time grid.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct TimeGrid {
    /// First time.
    #[arg(long, default_value_t = 0.0)]
    pub tmin: f64,
    /// Last time.
    #[arg(long, default_value_t = 10.0)]
    pub tmax: f64,
    /// Number of grid points (including both ends).
    #[arg(long, default_value_t = 11)]
    pub tsteps: usize,
}

impl TimeGrid {
    /// The grid points.
    pub fn points(&self) -> CliResult<Vec<f64>> {
        if !(self.tmin >= 0.0) || !(self.tmax >= self.tmin) || !self.tmax.is_finite() || self.tsteps == 0 {
            return Err(CliError::Input(format!(
                "time grid needs 0 ≤ tmin ≤ tmax and tsteps ≥ 1 (got {}, {}, {})",
                self.tmin, self.tmax, self.tsteps
            )));
        }
        if self.tsteps == 1 {
            return Ok(vec![self.tmin]);
        }
        let h = (self.tmax - self.tmin) / (self.tsteps - 1) as f64;
        Ok((0..self.tsteps).map(|k| if k + 1 == self.tsteps { self.tmax } else { self.tmin + h * k as f64 }).collect())
    }
}

/// Coupling: explicit or critical.
#[derive(Debug, Clone, Args, Serialize, Deserialize, PartialEq)]
pub struct Coupling {
    /// Coupling strength g.
    #[arg(long, conflicts_with = "critical")]
    pub g: Option<f64>,
    /// Use the critical coupling g = 1/ζ*.
    #[arg(long)]
    pub critical: bool,
}

/// Size tier of `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierArg {
    /// Reduced Monte Carlo sizes.
    Quick,
    /// Reference sizes.
    Full,
}

/// Subcommands.
#[derive(Debug, Clone, Subcommand, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Sample one matrix and write it in the ELXM binary format.
    Sample {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        /// Bounded Rademacher-type entries instead of Gaussian ones.
        #[arg(long)]
        rademacher: bool,
        /// Output file name.
        #[arg(long, default_value = "matrix.bin")]
        out: PathBuf,
    },
    /// Check a profile's structural assumptions.
    Validate {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        /// Power used for the primitivity check.
        #[arg(long, default_value_t = 1)]
        power: usize,
        /// Output file name.
        #[arg(long, default_value = "validation.json")]
        out: PathBuf,
    },
    /// Solve the Dyson equation at the given points.
    Dyson {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        /// Spectral parameter ζ as RE,IM; repeatable.
        #[arg(long = "zeta", value_parser = parse_complex, allow_hyphen_values = true, required = true)]
        zetas: Vec<C64>,
        /// Newton tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Output file name.
        #[arg(long, default_value = "dyson.json")]
        out: PathBuf,
    },
    /// Trace a level set of the stability gap and rasterize the gap field.
    Pseudospectrum {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        /// Gap level δ ∈ (0, 1].
        #[arg(long, default_value_t = 1e-3)]
        level: f64,
        /// Raster resolution per axis.
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        /// Boundary CSV file name.
        #[arg(long, default_value = "boundary.csv")]
        out: PathBuf,
        /// Raster CSV file name.
        #[arg(long, default_value = "raster.csv")]
        raster_out: PathBuf,
    },
    /// Evaluate the two-resolvent kernel on all pairs of the given points.
    Kernel {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        /// First spectral parameter as RE,IM; repeatable.
        #[arg(long = "zeta1", value_parser = parse_complex, allow_hyphen_values = true, required = true)]
        zeta1: Vec<C64>,
        /// Second spectral parameter as RE,IM; repeatable.
        #[arg(long = "zeta2", value_parser = parse_complex, allow_hyphen_values = true, required = true)]
        zeta2: Vec<C64>,
        /// Output file name.
        #[arg(long, default_value = "kernel.csv")]
        out: PathBuf,
    },
    /// Deterministic decay curve by double-contour quadrature.
    Decay {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        #[command(flatten)]
        #[serde(flatten)]
        coupling: Coupling,
        #[command(flatten)]
        #[serde(flatten)]
        grid: TimeGrid,
        /// Relative dilation of the automatic contour.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Cap on the number of contour nodes.
        #[arg(long, default_value_t = 2048)]
        n_max: usize,
        /// Relative agreement between successive refinements.
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
        /// Output file name.
        #[arg(long, default_value = "decay.csv")]
        out: PathBuf,
    },
    /// Elliptic decay by the Bessel series, with its asymptotics.
    EllipticDecay {
        /// Correlation ρ as RE or RE,IM.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        rho: C64,
        #[command(flatten)]
        #[serde(flatten)]
        coupling: Coupling,
        #[command(flatten)]
        #[serde(flatten)]
        grid: TimeGrid,
        /// Output file name.
        #[arg(long, default_value = "elliptic_decay.csv")]
        out: PathBuf,
    },
    /// Replica study of the finite-N decay against the deterministic curve.
    Montecarlo {
        #[command(flatten)]
        #[serde(flatten)]
        source: ProfileArgs,
        #[command(flatten)]
        #[serde(flatten)]
        coupling: Coupling,
        #[command(flatten)]
        #[serde(flatten)]
        grid: TimeGrid,
        /// Number of replicas.
        #[arg(long, default_value_t = 20)]
        replicas: usize,
        /// Bounded Rademacher-type entries (elliptic ensemble only).
        #[arg(long)]
        rademacher: bool,
        /// Output file name.
        #[arg(long, default_value = "montecarlo.csv")]
        out: PathBuf,
        /// Optional eigenvalue CSV file name.
        #[arg(long)]
        spectrum_out: Option<PathBuf>,
    },
    /// Run the acceptance checks.
    Verify {
        /// Size tier.
        #[arg(long, value_enum, default_value_t = TierArg::Quick)]
        tier: TierArg,
        /// Run only these checks (1 to 11); repeatable.
        #[arg(long = "only")]
        only: Vec<u8>,
        /// Report file name.
        #[arg(long, default_value = "verify.json")]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        /// Manifest file.
        manifest: PathBuf,
    },
}

impl Command {
    /// Kebab-case name of the subcommand.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::Validate { .. } => "validate",
            Command::Dyson { .. } => "dyson",
            Command::Pseudospectrum { .. } => "pseudospectrum",
            Command::Kernel { .. } => "kernel",
            Command::Decay { .. } => "decay",
            Command::EllipticDecay { .. } => "elliptic-decay",
            Command::Montecarlo { .. } => "montecarlo",
            Command::Verify { .. } => "verify",
            Command::Replay { .. } => "replay",
        }
    }
}

/// Context shared by every subcommand.
pub struct RunContext {
    /// Base seed.
    pub seed: u64,
    /// Output directory.
    pub out_dir: PathBuf,
}

impl RunContext {
    /// Path of an output file inside the output directory.
    pub fn path(&self, name: &Path) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Writes the manifest of a completed run.
fn write_manifest(ctx: &RunContext, command: &Command, outputs: &[PathBuf]) -> CliResult<()> {
    let doc = json!({
        "tool": "ellflow",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": ctx.seed,
        "command": command,
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    fs::write(ctx.path(Path::new(MANIFEST)), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Reads the command and seed recorded in a manifest.
pub fn read_manifest(path: &Path) -> CliResult<(Command, u64)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let seed = doc
        .get("seed")
        .and_then(|s| s.as_u64())
        .ok_or_else(|| CliError::Input(format!("{}: missing seed", path.display())))?;
    let command: Command = serde_json::from_value(doc.get("command").cloned().unwrap_or_default())
        .map_err(|e| CliError::Input(format!("{}: bad command: {e}", path.display())))?;
    if matches!(command, Command::Replay { .. }) {
        return Err(CliError::Input("a manifest cannot record a replay".into()));
    }
    Ok((command, seed))
}

/// Runs a parsed command, writing outputs and the manifest.
pub fn execute(cli: Cli) -> CliResult<()> {
    let (command, seed) = match cli.command {
        Command::Replay { manifest } => read_manifest(&manifest)?,
        other => (other, cli.seed),
    };
    fs::create_dir_all(&cli.out_dir)?;
    let ctx = RunContext { seed, out_dir: cli.out_dir };
    let work = || commands::dispatch(&ctx, &command);
    let report = match cli.threads {
        Some(0) => return Err(CliError::Input("--threads must be positive".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    // Checks that ran but failed still leave their outputs and manifest.
    write_manifest(&ctx, &command, &report.outputs)?;
    match report.failure {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => Ok(()),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("ellflow: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("ellflow: internal error (panic)");
            EXIT_INTERNAL
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(dir: &Path, rest: &[&str]) -> Vec<String> {
        let mut v = vec!["ellflow".to_string(), "--out-dir".into(), dir.display().to_string()];
        v.extend(rest.iter().map(|s| s.to_string()));
        v
    }

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("-1, 2.5").unwrap(), C64::new(-1.0, 2.5));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
        assert!(parse_complex("inf").is_err());
    }

    #[test]
    fn time_grids() {
        let g = TimeGrid { tmin: 0.0, tmax: 1.0, tsteps: 5 };
        assert_eq!(g.points().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(TimeGrid { tmin: 2.0, tmax: 2.0, tsteps: 1 }.points().unwrap(), vec![2.0]);
        assert!(TimeGrid { tmin: 2.0, tmax: 1.0, tsteps: 3 }.points().is_err());
        assert!(TimeGrid { tmin: -1.0, tmax: 1.0, tsteps: 3 }.points().is_err());
    }

    #[test]
    fn elliptic_decay_writes_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let code = run(args(dir.path(), &["elliptic-decay", "--rho", "0.5", "--critical", "--tmax", "4", "--tsteps", "5"]));
        assert_eq!(code, EXIT_OK);
        let csv = fs::read_to_string(dir.path().join("elliptic_decay.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,series,asymptotic,neg_tail_bound");
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first[0], 0.0);
        assert_eq!(first[1], 1.0);
        assert_eq!(csv.lines().count(), 6);
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        assert!(manifest.contains("\"elliptic-decay\""));
    }

    #[test]
    fn replay_reproduces_outputs_byte_for_byte() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let code = run(args(a.path(), &["--seed", "17", "montecarlo", "--rho", "0.3,0.1", "--n", "24", "--g", "0.6",
            "--replicas", "3", "--tmax", "2", "--tsteps", "3", "--spectrum-out", "spectra.csv"]));
        assert_eq!(code, EXIT_OK);
        let manifest = a.path().join(MANIFEST);
        let code = run(vec![
            "ellflow".to_string(),
            "--threads".into(),
            "1".into(),
            "--out-dir".into(),
            b.path().display().to_string(),
            "replay".into(),
            manifest.display().to_string(),
        ]);
        assert_eq!(code, EXIT_OK);
        for name in ["montecarlo.csv", "spectra.csv", MANIFEST] {
            let x = fs::read(a.path().join(name)).unwrap();
            let y = fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs");
        }
    }

    #[test]
    fn corrupted_profile_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.json");
        fs::write(&bad, "{\"n\": 3, \"s\": [0.1,").unwrap();
        let code = run(args(dir.path(), &["validate", "--profile", bad.to_str().unwrap()]));
        assert_eq!(code, EXIT_INPUT);
        let code = run(args(dir.path(), &["validate", "--profile", dir.path().join("missing.json").to_str().unwrap()]));
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn argument_errors_are_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(args(dir.path(), &["verify", "--tier", "huge"])), EXIT_INPUT);
        assert_eq!(run(args(dir.path(), &["decay", "--rho", "0.5", "--n", "4"])), EXIT_INPUT);
        assert_eq!(run(args(dir.path(), &["dyson", "--rho", "0.5"])), EXIT_INPUT);
        assert_eq!(run(args(dir.path(), &["elliptic-decay", "--rho", "1.5", "--g", "0.3"])), EXIT_INPUT);
    }

    #[test]
    fn numerical_failures_exit_with_one() {
        let dir = tempfile::tempdir().unwrap();
        // ζ = 0.5 lies inside the unit disk, the spectrum of the ρ = 0 profile.
        let code = run(args(dir.path(), &["dyson", "--rho", "0", "--n", "4", "--zeta", "0.5,0.1"]));
        assert_eq!(code, EXIT_NUMERICAL);
    }

    #[test]
    fn validation_failure_leaves_a_report() {
        let dir = tempfile::tempdir().unwrap();
        let profile = dir.path().join("p.json");
        let doc = json!({"n": 2, "s": [[0.5, 0.5], [0.5, 0.5]], "t": [[[0.0, 0.0], [0.55, 0.0]], [[0.55, 0.0], [0.0, 0.0]]]});
        fs::write(&profile, doc.to_string()).unwrap();
        let code = run(args(dir.path(), &["validate", "--profile", profile.to_str().unwrap()]));
        assert_eq!(code, EXIT_NUMERICAL);
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
        assert_eq!(report["passed"], false);
        assert!(dir.path().join(MANIFEST).exists());
    }

    #[test]
    fn sample_round_trips_through_the_binary_format() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(args(dir.path(), &["--seed", "5", "sample", "--rho", "0.5", "--n", "6"])), EXIT_OK);
        let x = ellflow::ensemble::read_matrix_binary(&dir.path().join("matrix.bin")).unwrap();
        let params = ellflow::EllipticParams { n: 6, rho: C64::new(0.5, 0.0), gaussian: true };
        assert_eq!(x, ellflow::sample_elliptic(&params, 5).unwrap().x);
    }

    #[test]
    fn small_commands_run() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        assert_eq!(run(args(d, &["dyson", "--rho", "0.5", "--n", "3", "--zeta", "3", "--zeta", "-1,2"])), EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("dyson.json")).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert!((v[0]["b"][0][0].as_f64().unwrap() - (-3.0 + 7f64.sqrt())).abs() < 1e-12);

        assert_eq!(run(args(d, &["kernel", "--rho", "0", "--n", "3", "--zeta1", "2", "--zeta2", "2", "--zeta2", "0,3"])), EXIT_OK);
        let k = fs::read_to_string(d.join("kernel.csv")).unwrap();
        assert!(k.starts_with("re1,im1,re2,im2,reK,imK,min_sing\n"));
        assert_eq!(k.lines().count(), 3);
        let first: Vec<f64> = k.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert!((first[4] - 1.0 / 3.0).abs() < 1e-13);

        assert_eq!(run(args(d, &["pseudospectrum", "--rho", "0.5", "--n", "2", "--resolution", "48"])), EXIT_OK);
        assert!(fs::read_to_string(d.join("boundary.csv")).unwrap().starts_with("re,im\n"));
        assert!(fs::read_to_string(d.join("raster.csv")).unwrap().starts_with("re,im,delta\n"));

        assert_eq!(run(args(d, &["decay", "--rho", "0.5", "--n", "2", "--critical", "--tmax", "2", "--tsteps", "3"])), EXIT_OK);
        let c = fs::read_to_string(d.join("decay.csv")).unwrap();
        assert!(c.starts_with("t,deterministic,quad_err,asymptotic\n"));
    }
}
