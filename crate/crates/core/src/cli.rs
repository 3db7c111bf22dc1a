//! Command-line runner.
//!
//! Exit status: 0 success, 1 verification failure, 2 configuration or run error.
//! Each subcommand writes into `<out>/<subcommand>/` through a staging directory
//! that is renamed into place only when the run succeeds.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use crate::config::{resolve, ConfigError, Override, RunConfig, Setup};
use crate::error::Error;
use crate::kernel::KernelSpec;
use crate::moments::{
    default_window, estimate_exponent, exact_second_moment, intermittency_verdict, mc_moments, temporal_report,
    ExponentEstimate, McOptions, MomentTarget, TemporalOptions,
};
use crate::noise::{NoiseMode, NoiseModel};
use crate::output::fmt_f64;
use crate::solver::{comparison_condition, evolve, TrajectoryMeta};
use crate::spectral::{liapounov_bounds, SpectralProfile};
use crate::verify::run_suites;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "STOCHHEAT_OUT";

/// Used when neither the config, `--out`, nor the environment names a directory.
pub const DEFAULT_OUT: &str = "stochheat-out";

#[derive(Parser, Debug)]
#[command(name = "stochheat", version, about = "Discrete stochastic heat equation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample trajectories, moment series, exponents and the intermittency verdict.
    Simulate(RunArgs),
    /// Exact second moments for linear sigma under white noise.
    ExactMoments(RunArgs),
    /// Upsilon table and moment-exponent bounds.
    Spectral(RunArgs),
    /// Temporal-noise report.
    Temporal(RunArgs),
    /// Property suites; exits 1 if any fails.
    Verify(RunArgs),
}

/// Overrides are applied in command-line order, later ones winning.
#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON config file; built-in defaults when absent.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Kernel shorthand, e.g. simple1 or lazy2:0.5.
    #[arg(long)]
    pub kernel: Vec<String>,
    /// Comma-separated lambda values for the spectral table.
    #[arg(long)]
    pub lambda: Vec<String>,
    /// Coefficient nu of sigma.
    #[arg(long)]
    pub nu: Vec<String>,
    #[arg(long)]
    pub nmax: Vec<String>,
    #[arg(long)]
    pub replicas: Vec<String>,
    #[arg(long)]
    pub seed: Vec<String>,
    /// Output directory (default: config, then $STOCHHEAT_OUT, then ./stochheat-out).
    #[arg(long)]
    pub out: Vec<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Vec<String>,
    /// Any config path, e.g. --set verify.paths=50 or --set 'noise={"family":"uniform",...}'.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::ExactMoments(_) => "exact-moments",
            Command::Spectral(_) => "spectral",
            Command::Temporal(_) => "temporal",
            Command::Verify(_) => "verify",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a) | Command::ExactMoments(a) | Command::Spectral(a) | Command::Temporal(a) | Command::Verify(a) => a,
        }
    }
}

/// Converts one flag occurrence into a config override.
fn flag_override(flag: &str, raw: &str) -> Result<Override, String> {
    let origin = format!("--{flag} {raw}");
    let num = |what: &str| -> Result<Value, String> {
        serde_json::from_str::<Value>(raw)
            .ok()
            .filter(Value::is_number)
            .ok_or_else(|| format!("{origin}: expected {what}"))
    };
    Ok(match flag {
        "kernel" => {
            let spec: KernelSpec = raw.parse().map_err(|e: Error| format!("{origin}: {e}"))?;
            Override::new(origin, "kernel", serde_json::to_value(spec).expect("kernel spec serializes"))
        }
        "lambda" => {
            let mut list = Vec::new();
            for part in raw.split(',') {
                let v: f64 = part.trim().parse().map_err(|_| format!("{origin}: `{part}` is not a number"))?;
                list.push(Value::from(v));
            }
            Override::new(origin, "spectral.lambdas", Value::Array(list))
        }
        "nu" => Override::new(origin.clone(), "sigma.nu", num("a number")?),
        "nmax" => Override::new(origin.clone(), "n_max", num("an integer")?),
        "replicas" => Override::new(origin.clone(), "replicas", num("an integer")?),
        "seed" => Override::new(origin.clone(), "seed", num("an integer")?),
        "threads" => Override::new(origin.clone(), "threads", num("an integer")?),
        "out" => Override::new(origin, "output_dir", Value::String(raw.to_string())),
        "set" => Override::parse_assignment(raw)?,
        _ => unreachable!("unknown override flag {flag}"),
    })
}

/// Argument ids, which are also the flag names.
const OVERRIDE_FLAGS: [&str; 9] = ["kernel", "lambda", "nu", "nmax", "replicas", "seed", "out", "threads", "set"];

/// Overrides of a subcommand's matches, sorted by position on the command line.
fn ordered_overrides(m: &ArgMatches) -> Result<Vec<Override>, String> {
    let mut all = Vec::new();
    for flag in OVERRIDE_FLAGS {
        let (Some(values), Some(idx)) = (m.get_many::<String>(flag), m.indices_of(flag)) else { continue };
        for (v, i) in values.zip(idx) {
            all.push((i, flag_override(flag, v)?));
        }
    }
    all.sort_by_key(|(i, _)| *i);
    Ok(all.into_iter().map(|(_, o)| o).collect())
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Run(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Failure {
        Failure::Run(format!("i/o: {e}"))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Failure {
        Failure::Config(e.to_string())
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    match execute(&cli.command, sub) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn execute(command: &Command, matches: &ArgMatches) -> Result<bool, Failure> {
    let args = command.args();
    let overrides = ordered_overrides(matches).map_err(Failure::Config)?;
    let text = match &args.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let source = args.config.as_ref().map(|p| p.display().to_string());
    let (mut config, setup) = resolve(text.as_deref().map(|t| (source.as_deref().unwrap_or(""), t)), &overrides)?;
    if let Command::Temporal(_) = command {
        // the temporal model reads the same family with spatially constant noise
        config.noise.mode = NoiseMode::Temporal;
    }
    let root = config
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let dest = root.join(command.name());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Run(format!("thread pool: {e}")))?;

    fs::create_dir_all(&root)?;
    let staging = root.join(format!(".{}.partial", command.name()));
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    let result = pool.install(|| {
        write_text(&staging.join("config.json"), &config.echo())?;
        match command {
            Command::Simulate(_) => simulate(&config, &setup, &staging),
            Command::ExactMoments(_) => exact_moments(&config, &setup, &staging),
            Command::Spectral(_) => spectral(&config, &setup, &staging),
            Command::Temporal(_) => temporal(&config, &setup, &staging),
            Command::Verify(_) => verify(&config, &setup, &staging),
        }
    });
    match result {
        Ok(ok) => {
            if dest.exists() {
                fs::remove_dir_all(&dest)?;
            }
            fs::rename(&staging, &dest)?;
            println!("wrote {}", dest.display());
            Ok(ok)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn write_text(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text)
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}

fn csv(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Quotes a free-text CSV field.
fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn exponent_rows(w: &mut impl Write, rows: &[ExponentEstimate]) -> io::Result<()> {
    writeln!(w, "p,gamma_hat,uncertainty,window_start,window_end,ratio_slope")?;
    for e in rows {
        writeln!(w, "{},{},{},{},{},{}", fmt_f64(e.p), fmt_f64(e.slope), fmt_f64(e.stderr), e.window.0, e.window.1, fmt_f64(e.ratio_slope))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    trajectory: &'a TrajectoryMeta,
    written_paths: u64,
    moment_replicas: u64,
    target: MomentTarget,
    p_grid: &'a [f64],
    window: (usize, usize),
}

fn simulate(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<bool, Failure> {
    let problem = setup.problem(cfg)?;
    let opts = &cfg.simulate;
    let mut w = csv(&dir.join("trajectory.csv"))?;
    let mut first_meta = None;
    for r in 0..opts.write_paths.max(1) {
        let t = evolve(&problem, cfg.n_max, cfg.seed, r)?;
        if r < opts.write_paths {
            t.write_csv(&mut w, r == 0)?;
        }
        first_meta.get_or_insert(t.meta);
    }
    w.flush()?;

    let window = opts.window.unwrap_or_else(|| default_window(cfg.n_max));
    let meta = first_meta.expect("at least one path");
    write_json(
        &dir.join("metadata.json"),
        &SimulateMeta { trajectory: &meta, written_paths: opts.write_paths, moment_replicas: cfg.replicas, target: opts.target, p_grid: &cfg.p_grid, window },
    )?;

    let series = mc_moments(
        &problem,
        &McOptions { target: opts.target, p_grid: cfg.p_grid.clone(), n_max: cfg.n_max, replicas: cfg.replicas, seed: cfg.seed, signed: false },
    )?;
    let mut w = csv(&dir.join("moments.csv"))?;
    let d = problem.dim();
    if opts.target == MomentTarget::AllSites {
        let coords: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(w, "n,p,{},estimate,stderr", coords.join(","))?;
        for s in &series {
            for (n, region) in s.regions.iter().enumerate() {
                for (x, e) in region.sites().zip(&s.values[n]) {
                    let c: Vec<String> = x.coords(d).iter().map(i64::to_string).collect();
                    writeln!(w, "{n},{},{},{},{}", fmt_f64(s.p), c.join(","), fmt_f64(e.value), fmt_f64(e.stderr))?;
                }
            }
        }
    } else {
        writeln!(w, "n,p,estimate,stderr")?;
        for s in &series {
            for (n, e) in s.scalar().iter().enumerate() {
                writeln!(w, "{n},{},{},{}", fmt_f64(s.p), fmt_f64(e.value), fmt_f64(e.stderr))?;
            }
        }
    }
    w.flush()?;

    if opts.target == MomentTarget::AllSites {
        return Ok(true);
    }
    let mut estimates = Vec::new();
    let mut unusable = Vec::new();
    for s in &series {
        let values: Vec<f64> = s.scalar().iter().map(|e| e.value).collect();
        match estimate_exponent(s.p, &values, window) {
            Ok(e) => estimates.push(e),
            Err(e) => unusable.push(format!("p = {}: {e}", s.p)),
        }
    }
    let mut w = csv(&dir.join("exponents.csv"))?;
    exponent_rows(&mut w, &estimates)?;
    w.flush()?;
    let gate = comparison_condition(&problem.kernel, &problem.sigma, &problem.noise);
    #[derive(Serialize)]
    struct Out<'a> {
        comparison: crate::solver::ComparisonVerdict,
        unusable: &'a [String],
        report: crate::moments::VerdictReport,
    }
    write_json(&dir.join("verdict.json"), &Out { comparison: gate, unusable: &unusable, report: intermittency_verdict(&estimates, gate.holds) })?;
    Ok(true)
}

fn exact_moments(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<bool, Failure> {
    let nu = cfg
        .sigma
        .linear_coefficient()
        .ok_or_else(|| Failure::Config(format!("exact-moments needs sigma linear, got {}", cfg.sigma)))?;
    if !(setup.noise.is_white() && setup.noise.mode() == NoiseMode::Spacetime) {
        return Err(Failure::Config("exact-moments needs white space-time noise (noise.white = true)".into()));
    }
    if cfg.n_max < 1 {
        return Err(Failure::Config("exact-moments needs n_max >= 1".into()));
    }
    let m = exact_second_moment(&setup.kernel, &setup.u0, nu.abs(), cfg.n_max)?;
    let mut w = csv(&dir.join("second_moments.csv"))?;
    writeln!(w, "n,sup,total")?;
    for r in m.rows() {
        writeln!(w, "{},{},{}", r.n, fmt_f64(r.sup), fmt_f64(r.total))?;
    }
    w.flush()?;

    let window = cfg.simulate.window.unwrap_or_else(|| default_window(cfg.n_max));
    let e = estimate_exponent(2.0, &m.sup_series(), window)?;
    let profile = SpectralProfile::new(&setup.kernel);
    let predicted = if nu == 0.0 { f64::NEG_INFINITY } else { profile.upsilon_inverse(1.0 / (nu * nu))?.ln() };
    let mut w = csv(&dir.join("exponent.csv"))?;
    writeln!(w, "p,gamma_hat,uncertainty,window_start,window_end,ratio_slope,predicted")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        fmt_f64(e.p),
        fmt_f64(e.slope),
        fmt_f64(e.stderr),
        e.window.0,
        e.window.1,
        fmt_f64(e.ratio_slope),
        fmt_f64(predicted)
    )?;
    w.flush()?;
    println!(
        "second-moment exponent over [{}, {}]: slope {:.6} +- {:.2e}, ratio {:.6}, ln Upsilon^-1(nu^-2) = {:.6}",
        e.window.0, e.window.1, e.slope, e.stderr, e.ratio_slope, predicted
    );
    Ok(true)
}

fn spectral(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<bool, Failure> {
    let mut profile = SpectralProfile::new(&setup.kernel);
    if let Some(points) = cfg.spectral.points {
        profile = profile.with_points(points);
    }
    let mut w = csv(&dir.join("upsilon.csv"))?;
    writeln!(w, "lambda,upsilon_series,upsilon_quadrature,abs_diff")?;
    for &l in &cfg.spectral.lambdas {
        let s = profile.upsilon_series(l)?.value;
        let q = profile.upsilon_quadrature(l, profile.points())?;
        writeln!(w, "{},{},{},{}", fmt_f64(l), fmt_f64(s), fmt_f64(q), fmt_f64((s - q).abs()))?;
        println!("lambda {l}: series {s:.10} quadrature {q:.10}");
    }
    w.flush()?;
    let mut bounds = Vec::new();
    for &p in cfg.p_grid.iter().filter(|p| **p >= 2.0) {
        bounds.push(liapounov_bounds(&profile, p, &cfg.sigma)?);
    }
    #[derive(Serialize)]
    struct Out<'a> {
        kernel: &'a KernelSpec,
        sigma: String,
        /// Upper and lower are bounds on the exponent of ln ||u_n(x)||_p.
        bounds: Vec<crate::spectral::BoundReport>,
    }
    write_json(&dir.join("bounds.json"), &Out { kernel: &cfg.kernel, sigma: cfg.sigma.to_string(), bounds })?;
    Ok(true)
}

fn temporal(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<bool, Failure> {
    let noise = NoiseModel::new(cfg.noise).map_err(|e| Failure::Config(format!("`noise`: {e}")))?;
    let t = &cfg.temporal;
    let opts = TemporalOptions {
        p_grid: cfg.p_grid.clone(),
        n_max: t.n_max.unwrap_or(cfg.n_max),
        paths: t.paths,
        moment_horizon: t.moment_horizon,
        moment_paths: t.moment_paths,
        seed: cfg.seed,
    };
    let report = temporal_report(&setup.kernel, &noise, &setup.u0, &opts).map_err(|e| match e {
        Error::Assumption(_) | Error::Domain(_) => Failure::Config(e.to_string()),
        e => e.into(),
    })?;
    write_json(&dir.join("temporal_report.json"), &report)?;
    let mut w = csv(&dir.join("gamma.csv"))?;
    writeln!(w, "p,gamma")?;
    for g in &report.gamma {
        writeln!(w, "{},{}", fmt_f64(g.p), fmt_f64(g.gamma))?;
    }
    w.flush()?;
    let mut w = csv(&dir.join("moment_checks.csv"))?;
    writeln!(w, "n,p,mean,stderr,predicted,analytic_stderr")?;
    for c in &report.moment_checks {
        writeln!(w, "{},{},{},{},{},{}", c.n, fmt_f64(c.p), fmt_f64(c.mean), fmt_f64(c.stderr), fmt_f64(c.predicted), fmt_f64(c.analytic_stderr))?;
    }
    w.flush()?;
    println!(
        "Gamma'(0+) = {:.6}, mean (1/n) ln M_n = {:.6} +- {:.2e}",
        report.gamma_prime_zero, report.log_sup_rate.value, report.log_sup_rate.stderr
    );
    Ok(true)
}

fn verify(cfg: &RunConfig, setup: &Setup, dir: &Path) -> Result<bool, Failure> {
    let report = run_suites(&setup.problem(cfg)?, cfg)?;
    let mut w = csv(&dir.join("verify.csv"))?;
    writeln!(w, "suite,status,checks,detail")?;
    for s in &report.suites {
        writeln!(w, "{},{},{},{}", s.name, s.status.label(), s.checks, quote(&s.detail))?;
    }
    w.flush()?;
    print!("{}", report.table());
    Ok(report.passed())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_follow_command_line_order() {
        let m = Cli::command()
            .try_get_matches_from(["stochheat", "spectral", "--set", "sigma.nu=3", "--nu", "0.5", "--lambda", "2,3", "--set", "n_max=4", "--nmax", "9"])
            .unwrap();
        let o = ordered_overrides(m.subcommand().unwrap().1).unwrap();
        let paths: Vec<&str> = o.iter().map(|o| o.path.as_str()).collect();
        assert_eq!(paths, ["sigma.nu", "sigma.nu", "spectral.lambdas", "n_max", "n_max"]);
        let (c, _) = resolve(None, &o).unwrap();
        assert_eq!(c.n_max, 9);
        assert_eq!(c.spectral.lambdas, [2.0, 3.0]);
    }

    #[test]
    fn bad_flag_values_are_config_errors() {
        assert!(flag_override("nmax", "ten").is_err());
        assert!(flag_override("kernel", "hex3").is_err());
        assert!(flag_override("lambda", "2,x").is_err());
        assert_eq!(quote("a \"b\", c"), "\"a \"\"b\"\", c\"");
    }
}
