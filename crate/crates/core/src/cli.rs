//! The `sheetreg` command-line front end.
//!
//! Exit codes: 0 success, 1 domain or model failure, 2 usage, config or I/O
//! error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimation::{estimate, fisher_with_flags, EstimationResult};
use crate::experiment::{emit_tables, run_experiment, Profile, TableFormat};
use crate::quadrature::integrate_over_g_scalar;
use crate::random_fields::{draw_kl, dump_grid_csv, Field, FieldModel, FieldSample, GridField};

/// `println!` that ignores write errors, so a closed pipe ends output
/// quietly instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Condition numbers above this are reported as near-singular.
pub const CONDITION_WARNING: f64 = 1e10;

/// Band used by `experiment` for its built-in check.
const MEAN_BAND: f64 = 3.0;
const COVARIANCE_BAND: f64 = 0.15;

#[derive(Debug, Parser)]
#[command(name = "sheetreg", version, about = "Regression for fields driven by Wiener and Ornstein-Uhlenbeck sheets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the observation domain of a config.
    DomainCheck(Common),
    /// Compute the Fisher matrix.
    Fisher(Common),
    /// Estimate the coefficients from a gridded or simulated field.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// CSV grid with header `s,t,z`.
        #[arg(long, conflicts_with = "simulate", required_unless_present = "simulate")]
        field: Option<PathBuf>,
        /// Simulate the observed field with this seed.
        #[arg(long, value_name = "SEED")]
        simulate: Option<u64>,
        /// KL truncation order of the simulated field.
        #[arg(long)]
        n: Option<usize>,
        /// Multiplies the simulated noise; 0 gives the drift alone.
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Run the Monte Carlo study.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        /// Base seed of the replications.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 lets the pool pick.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write a simulated field on a regular grid as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// KL truncation order.
        #[arg(long)]
        n: Option<usize>,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        noise_scale: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the model of the config.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Wiener,
    OuStat,
    OuZero,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_domain_or_model() {
                1
            } else {
                2
            }
        }
    }
}

fn override_model(current: FieldModel, arg: Option<ModelArg>) -> FieldModel {
    let (alpha, beta, sigma) = current.rates().unwrap_or((1.0, 1.0, 1.0));
    match arg {
        None => current,
        Some(ModelArg::Wiener) => FieldModel::Wiener,
        Some(ModelArg::OuStat) => FieldModel::StationaryOu { alpha, beta, sigma },
        Some(ModelArg::OuZero) => FieldModel::ZeroStartOu { alpha, beta, sigma },
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&common.config)?;
    cfg.model = override_model(cfg.model, common.model);
    cfg.model.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("sheetreg-out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_manifest(dir: &Path, command: &str, config: &RunConfig, started: Instant, outputs: &[PathBuf]) -> Result<()> {
    let outputs = outputs
        .iter()
        .map(|p| {
            Ok(OutputDigest {
                file: p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: command.into(),
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// `max|λ| / min|λ|` of a symmetric matrix; infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|x| x.abs()).collect();
    let hi = abs.iter().cloned().fold(0.0, f64::max);
    let lo = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn dispatch(command: Command) -> Result<()> {
    let started = Instant::now();
    match command {
        Command::DomainCheck(common) => domain_check(&common, started),
        Command::Fisher(common) => fisher_cmd(&common, started),
        Command::Estimate {
            common,
            field,
            simulate,
            n,
            noise_scale,
        } => estimate_cmd(&common, field, simulate, n, noise_scale, started),
        Command::Experiment {
            common,
            profile,
            seed,
            workers,
        } => experiment_cmd(&common, profile, seed, workers, started),
        Command::Simulate {
            common,
            seed,
            n,
            grid,
            noise_scale,
        } => simulate_cmd(&common, seed, n, grid, noise_scale, started),
    }
}

fn domain_check(common: &Common, started: Instant) -> Result<()> {
    let cfg = load(common)?;
    let d = match cfg.domain() {
        Ok(d) => d,
        Err(e) => {
            say!("domain: INVALID");
            return Err(e);
        }
    };
    let (s0, s1, t0, t1) = d.bounding_box();
    let area = integrate_over_g_scalar(|_, _| 1.0, &d, &cfg.quadrature);
    say!("domain: valid");
    say!("  a = {}, b1 = {}, b2 = {}, c = {}", d.a(), d.b1(), d.b2(), d.c());
    say!("  bounding box [{s0}, {s1}] x [{t0}, {t1}]");
    say!("  strip width {}", d.epsilon());
    say!("  area {}", area.value);
    if common.out.is_some() {
        let dir = out_dir(common)?;
        write_manifest(&dir, "domain-check", &cfg, started, &[])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FisherOutput<'a> {
    model: FieldModel,
    regressors: &'a [String],
    fisher: Vec<Vec<f64>>,
    condition_number: f64,
    diagnostics: crate::quadrature::QuadFlags,
}

fn fisher_cmd(common: &Common, started: Instant) -> Result<()> {
    let cfg = load(common)?;
    let d = cfg.domain()?;
    let regs = cfg.regressors()?;
    let (a, flags) = fisher_with_flags(&cfg.model, &d, &regs, &cfg.quadrature)?;
    if flags.non_finite {
        return Err(Error::QuadratureFailure("Fisher matrix is not finite".into()));
    }
    if flags.depth_exceeded {
        eprintln!("warning: quadrature hit its depth limit; entries may be inaccurate");
    }
    let cond = condition_number(&a);
    say!("model {}", cfg.model.name());
    for r in a.row_iter() {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:.6}")).collect();
        say!("  {}", cells.join("  "));
    }
    say!("condition number {cond:e}");
    if !(cond <= CONDITION_WARNING) {
        eprintln!("warning: condition number above {CONDITION_WARNING:e}; regressors are nearly dependent on the domain");
    }
    let dir = out_dir(common)?;
    let json = dir.join("fisher.json");
    let rows: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
    write_json(
        &json,
        &FisherOutput {
            model: cfg.model,
            regressors: regs.labels(),
            fisher: rows.clone(),
            condition_number: cond,
            diagnostics: flags,
        },
    )?;
    let csv_path = dir.join("fisher.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(regs.labels())?;
    for r in &rows {
        w.write_record(r.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    write_manifest(&dir, "fisher", &cfg, started, &[json, csv_path])
}

fn simulated_field(cfg: &RunConfig, seed: u64, n: usize, noise_scale: f64) -> Result<FieldSample> {
    let d = cfg.domain()?;
    let rect = cfg.rectangle(&d);
    let m = cfg.true_m()?;
    if noise_scale == 0.0 {
        return FieldSample::drift_only(cfg.model, rect.s_max, rect.t_max, cfg.regressors()?, m);
    }
    let kl = draw_kl(n, rect.s_max, rect.t_max, seed)?;
    Ok(FieldSample::new(cfg.model, kl)?
        .with_drift(cfg.regressors()?, m)?
        .with_noise_scale(noise_scale))
}

fn estimate_cmd(
    common: &Common,
    field: Option<PathBuf>,
    simulate: Option<u64>,
    n: Option<usize>,
    noise_scale: Option<f64>,
    started: Instant,
) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(n) = n {
        cfg.estimate.n = n;
    }
    if let Some(x) = noise_scale {
        cfg.estimate.noise_scale = x;
    }
    let d = cfg.domain()?;
    let regs = cfg.regressors()?;
    let z: Box<dyn Field> = match (field, simulate) {
        (Some(path), _) => Box::new(GridField::from_csv(BufReader::new(File::open(path)?))?),
        (None, Some(seed)) => Box::new(simulated_field(&cfg, seed, cfg.estimate.n, cfg.estimate.noise_scale)?),
        (None, None) => return Err(Error::InvalidArgument("give --field or --simulate".into())),
    };
    let result: EstimationResult = estimate(&cfg.model, z.as_ref(), &d, &regs, &cfg.stoch())?;
    say!("model {}", cfg.model.name());
    for (label, (m, var)) in regs
        .labels()
        .iter()
        .zip(result.m_hat.iter().zip((0..regs.p()).map(|k| result.covariance[k][k])))
    {
        say!("  {label}: {m:.6} (sd {:.6})", var.sqrt());
    }
    say!("condition number {:e}", result.condition_number);
    let dir = out_dir(common)?;
    let path = dir.join("estimate.json");
    write_json(&path, &result)?;
    write_manifest(&dir, "estimate", &cfg, started, &[path])
}

fn experiment_cmd(
    common: &Common,
    profile: Option<ProfileArg>,
    seed: Option<u64>,
    workers: Option<usize>,
    started: Instant,
) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(p) = profile {
        cfg.experiment.profile = p.into();
        cfg.experiment.replications = None;
        cfg.experiment.n_sweep = None;
    }
    if let Some(s) = seed {
        cfg.experiment.base_seed = s;
    }
    if let Some(w) = workers {
        cfg.experiment.workers = w;
    }
    let exp = cfg.experiment_config(None)?;
    let result = run_experiment(&exp)?;
    let dir = out_dir(common)?;
    let mut outputs = emit_tables(&result, &dir, TableFormat::Csv)?;
    outputs.extend(emit_tables(&result, &dir, TableFormat::Json)?);
    say!(
        "model {}, {} replications, n in {:?}",
        exp.model.name(),
        exp.replications,
        exp.n_sweep
    );
    for pt in &result.sweep {
        let z: Vec<String> = pt.mean_z_scores.iter().map(|z| format!("{z:.2}")).collect();
        say!(
            "  n = {:>3}: failures {}, mean z-scores [{}], Cov(zeta) relative error {:.4}",
            pt.n,
            pt.failures,
            z.join(", "),
            pt.covariance_rel_error
        );
    }
    if let Some(last) = result.sweep.last() {
        let means = last.means_within(MEAN_BAND);
        let cov = last.covariance_rel_error <= COVARIANCE_BAND;
        say!(
            "band check at n = {}: means {} (within {MEAN_BAND} SE), covariance {} (within {:.0}%)",
            last.n,
            verdict(means),
            verdict(cov),
            COVARIANCE_BAND * 100.0
        );
    }
    write_manifest(&dir, "experiment", &cfg, started, &outputs)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn simulate_cmd(
    common: &Common,
    seed: u64,
    n: Option<usize>,
    grid: usize,
    noise_scale: Option<f64>,
    started: Instant,
) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(n) = n {
        cfg.estimate.n = n;
    }
    if let Some(x) = noise_scale {
        cfg.estimate.noise_scale = x;
    }
    let d = cfg.domain()?;
    let (s0, s1, t0, t1) = d.bounding_box();
    let z = simulated_field(&cfg, seed, cfg.estimate.n, cfg.estimate.noise_scale)?;
    let dir = out_dir(common)?;
    let path = dir.join("field.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    dump_grid_csv(&z, (s0, s1), (t0, t1), grid, grid, &mut w)?;
    w.flush()?;
    say!("wrote {grid}x{grid} grid over [{s0}, {s1}] x [{t0}, {t1}] to {}", path.display());
    write_manifest(&dir, "simulate", &cfg, started, &[path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_of_identity_and_singular() {
        assert_eq!(condition_number(&DMatrix::identity(3, 3)), 1.0);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(condition_number(&a) > CONDITION_WARNING);
    }

    #[test]
    fn model_override_keeps_rates() {
        let ou = FieldModel::StationaryOu { alpha: 2.0, beta: 3.0, sigma: 0.5 };
        assert_eq!(
            override_model(ou, Some(ModelArg::OuZero)),
            FieldModel::ZeroStartOu { alpha: 2.0, beta: 3.0, sigma: 0.5 }
        );
        assert_eq!(
            override_model(FieldModel::Wiener, Some(ModelArg::OuStat)),
            FieldModel::StationaryOu { alpha: 1.0, beta: 1.0, sigma: 1.0 }
        );
        assert_eq!(override_model(ou, None), ou);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["sheetreg", "bogus"]), 2);
        assert_eq!(run(["sheetreg", "fisher"]), 2);
        assert_eq!(run(["sheetreg", "--version"]), 0);
    }
}
