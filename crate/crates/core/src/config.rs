//! Run configuration: one JSON document plus ordered command-line overrides.
//!
//! Every top-level key is optional and falls back to [`RunConfig::default`].
//! A key present in the file replaces the default section as a whole; overrides
//! then set dotted paths (`sigma.nu`, `verify.paths`) in command-line order.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, WalkKernel};
use crate::lattice::{BoxRegion, LatticeField, Site};
use crate::moments::MomentTarget;
use crate::noise::{NoiseModel, NoiseSpec};
use crate::solver::{Domain, Problem, SigmaSpec};

/// Initial condition u_0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `mass` at the origin.
    Delta { mass: f64 },
    /// `value` on the max-norm ball of `radius`.
    Box { value: f64, radius: u64 },
    /// Explicit (site, value) pairs.
    Table { entries: Vec<(Vec<i64>, f64)> },
}

impl InitialSpec {
    pub fn build(&self, dim: usize) -> Result<LatticeField> {
        let f = match self {
            InitialSpec::Delta { mass } => LatticeField::delta(dim, Site::ORIGIN, *mass),
            InitialSpec::Box { value, radius } => LatticeField::constant_on(BoxRegion::centered(dim, *radius), *value),
            InitialSpec::Table { entries } => {
                let mut sites = Vec::with_capacity(entries.len());
                for (x, v) in entries {
                    if x.len() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
                    }
                    sites.push((Site::new(x), *v));
                }
                LatticeField::from_entries(dim, sites)?
            }
        };
        if f.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidField("initial values must be finite".into()));
        }
        Ok(f)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    #[default]
    Unbounded,
    /// The max-norm ball of `radius`.
    Box { radius: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    /// Replicas 0..write_paths are exported to trajectory.csv.
    pub write_paths: u64,
    pub target: MomentTarget,
    /// Regression window; defaults to the last quarter of the horizon.
    pub window: Option<(usize, usize)>,
}

impl Default for SimulateOptions {
    fn default() -> SimulateOptions {
        SimulateOptions { write_paths: 1, target: MomentTarget::Site(Site::ORIGIN), window: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralOptions {
    pub lambdas: Vec<f64>,
    /// Quadrature points per axis; the dimension default when absent.
    pub points: Option<usize>,
}

impl Default for SpectralOptions {
    fn default() -> SpectralOptions {
        SpectralOptions { lambdas: vec![1.2, 1.5, 2.0, 5.0], points: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalConfig {
    pub paths: u64,
    /// Lattice horizon; the run horizon when absent.
    pub n_max: Option<usize>,
    pub moment_horizon: usize,
    pub moment_paths: u64,
}

impl Default for TemporalConfig {
    fn default() -> TemporalConfig {
        TemporalConfig { paths: 200, n_max: None, moment_horizon: 50, moment_paths: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub iterations: usize,
    pub n_max: usize,
    pub lambda: f64,
    pub p: f64,
    pub replicas: u64,
}

impl Default for PicardConfig {
    fn default() -> PicardConfig {
        PicardConfig { iterations: 6, n_max: 10, lambda: 1.5, p: 2.0, replicas: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Paths per pathwise suite.
    pub paths: u64,
    pub n_max: usize,
    /// Replicas of the Monte Carlo second-moment check.
    pub oracle_replicas: u64,
}

impl Default for VerifyConfig {
    fn default() -> VerifyConfig {
        VerifyConfig { paths: 100, n_max: 10, oracle_replicas: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub sigma: SigmaSpec,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub initial: InitialSpec,
    pub domain: DomainSpec,
    pub n_max: usize,
    pub replicas: u64,
    pub p_grid: Vec<f64>,
    /// Placement only; not echoed.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Worker count; results do not depend on it, so it is not echoed.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    pub simulate: SimulateOptions,
    pub spectral: SpectralOptions,
    pub temporal: TemporalConfig,
    pub picard: PicardConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            kernel: KernelSpec::Lazy { dim: 1, stay: 0.5 },
            sigma: SigmaSpec::linear(0.5),
            noise: NoiseSpec::rademacher(1.0).white(),
            seed: 1,
            initial: InitialSpec::Delta { mass: 1.0 },
            domain: DomainSpec::Unbounded,
            n_max: 50,
            replicas: 1000,
            p_grid: vec![1.0, 2.0, 3.0, 4.0],
            output_dir: None,
            threads: None,
            simulate: SimulateOptions::default(),
            spectral: SpectralOptions::default(),
            temporal: TemporalConfig::default(),
            picard: PicardConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// Validated components of a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Setup {
    pub kernel: WalkKernel,
    pub noise: NoiseModel,
    pub u0: LatticeField,
    pub domain: Domain,
}

impl Setup {
    pub fn problem(&self, config: &RunConfig) -> Result<Problem> {
        Problem::new(self.kernel.clone(), config.sigma.clone(), self.noise, self.u0.clone(), self.domain)
    }
}

impl RunConfig {
    /// Checks every component; the error names the offending top-level key.
    pub fn validate(&self) -> std::result::Result<Setup, (&'static str, Error)> {
        let kernel = WalkKernel::new(&self.kernel).map_err(|e| ("kernel", e))?;
        self.sigma.validate().map_err(|e| ("sigma", e))?;
        let noise = NoiseModel::new(self.noise).map_err(|e| ("noise", e))?;
        let u0 = self.initial.build(kernel.dim()).map_err(|e| ("initial", e))?;
        let domain = match self.domain {
            DomainSpec::Unbounded => Domain::Unbounded,
            DomainSpec::Box { radius } => Domain::Boxed(BoxRegion::centered(kernel.dim(), radius)),
        };
        if let Some(p) = self.p_grid.iter().find(|p| !(**p >= 1.0) || !p.is_finite()) {
            return Err(("p_grid", Error::Domain(format!("moment orders must be finite and >= 1, got {p}"))));
        }
        if self.p_grid.is_empty() {
            return Err(("p_grid", Error::Domain("the moment grid is empty".into())));
        }
        if self.replicas < 2 {
            return Err(("replicas", Error::Domain("at least two replicas are needed".into())));
        }
        if self.threads == Some(0) {
            return Err(("threads", Error::Domain("thread count must be positive".into())));
        }
        if let Some(l) = self.spectral.lambdas.iter().find(|l| !(**l > 1.0)) {
            return Err(("spectral", Error::Domain(format!("lambda must exceed 1, got {l}"))));
        }
        let setup = Setup { kernel, noise, u0, domain };
        setup.problem(self).map_err(|e| match e {
            Error::Assumption(_) => ("domain", e),
            _ => ("initial", e),
        })?;
        Ok(setup)
    }

    /// Pretty JSON with a trailing newline; reading it back gives the same config.
    pub fn echo(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// A configuration problem, with the file line when it can be located.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A dotted-path assignment from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    /// How the user wrote it, for messages.
    pub origin: String,
    pub path: String,
    pub value: Value,
}

impl Override {
    pub fn new(origin: impl Into<String>, path: impl Into<String>, value: Value) -> Override {
        Override { origin: origin.into(), path: path.into(), value }
    }

    /// Parses `key.path=value`; the value is JSON when it parses as JSON and a string otherwise.
    pub fn parse_assignment(text: &str) -> std::result::Result<Override, String> {
        let (k, v) = text.split_once('=').ok_or_else(|| format!("expected key=value, got `{text}`"))?;
        if k.is_empty() || k.split('.').any(str::is_empty) {
            return Err(format!("bad key `{k}` in `{text}`"));
        }
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        Ok(Override::new(format!("--set {text}"), k, value))
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> std::result::Result<(), String> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().ok_or_else(|| format!("`{}` is not an object", keys[..i].join(".")))?;
        if i + 1 == keys.len() {
            obj.insert(k.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(k.to_string()).or_insert(Value::Null);
    }
    unreachable!("path has at least one key")
}

/// 1-based line of the first occurrence of `"key"` in the text.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Resolves file text (or the defaults) and overrides into a validated config.
///
/// `source` names the text in messages.
pub fn resolve(text: Option<(&str, &str)>, overrides: &[Override]) -> std::result::Result<(RunConfig, Setup), ConfigError> {
    let mut root = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    let (source, body) = text.unwrap_or(("<defaults>", ""));
    let err = |line, message| ConfigError { source: source.to_string(), line, message };
    if let Some((_, body)) = text {
        // typed parse first so that type errors carry file positions
        if let Err(e) = serde_json::from_str::<RunConfig>(body) {
            return Err(err(Some(e.line()).filter(|l| *l > 0), e.to_string()));
        }
        let file: Value = serde_json::from_str(body).map_err(|e| err(Some(e.line()), e.to_string()))?;
        let obj = root.as_object_mut().expect("object");
        for (k, v) in file.as_object().cloned().unwrap_or_default() {
            obj.insert(k, v);
        }
    }
    let mut touched = Vec::new();
    for o in overrides {
        set_path(&mut root, &o.path, o.value.clone()).map_err(|m| err(None, format!("{}: {m}", o.origin)))?;
        touched.push((o.path.split('.').next().unwrap_or("").to_string(), o.origin.clone()));
    }
    let config: RunConfig = serde_json::from_value(root).map_err(|e| {
        let who: Vec<&str> = touched.iter().map(|t| t.1.as_str()).collect();
        err(None, format!("{e} (after overrides {})", who.join(", ")))
    })?;
    match config.validate() {
        Ok(setup) => Ok((config, setup)),
        Err((key, e)) => {
            let message = format!("`{key}`: {e}");
            match touched.iter().rev().find(|t| t.0 == key) {
                Some((_, origin)) => Err(err(None, format!("{message} (set by {origin})"))),
                None => Err(err(key_line(body, key), message)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_echo_round_trips() {
        let (c, _) = resolve(None, &[]).unwrap();
        let back: RunConfig = serde_json::from_str(&c.echo()).unwrap();
        assert_eq!(back, c);
        assert!(!c.echo().contains("threads"));
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let (c, s) = resolve(Some(("c.json", r#"{"n_max": 7, "kernel": {"kind": "simple", "dim": 2}}"#)), &[]).unwrap();
        assert_eq!(c.n_max, 7);
        assert_eq!(c.replicas, RunConfig::default().replicas);
        assert_eq!(s.u0.dim(), 2);
    }

    #[test]
    fn overrides_apply_in_order() {
        let o = vec![
            Override::new("--nu 2", "sigma.nu", Value::from(2.0)),
            Override::parse_assignment("sigma.nu=0.25").unwrap(),
            Override::parse_assignment("verify.paths=3").unwrap(),
        ];
        let (c, _) = resolve(None, &o).unwrap();
        assert_eq!(c.sigma, SigmaSpec::linear(0.25));
        assert_eq!(c.verify.paths, 3);
        assert_eq!(c.verify.n_max, VerifyConfig::default().n_max);
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let e = resolve(Some(("c.json", "{\n  \"n_max\": 5,\n  \"seed\": \"x\"\n}")), &[]).unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = resolve(Some(("c.json", "{\n  \"n_max\": 5,\n  \"bogus\": 1\n}")), &[]).unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = resolve(Some(("c.json", "{\n  \"n_max\": 5,\n")), &[]).unwrap_err();
        assert!(e.line.is_some());
    }

    #[test]
    fn validation_errors_point_at_the_key() {
        let text = "{\n  \"n_max\": 5,\n  \"kernel\": {\"kind\": \"lazy\", \"dim\": 1, \"stay\": 1.5}\n}";
        let e = resolve(Some(("c.json", text)), &[]).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("c.json:3: `kernel`"));
        let o = vec![Override::parse_assignment("sigma={\"kind\":\"affine\",\"nu\":1,\"c\":1}").unwrap()];
        let e = resolve(None, &o).unwrap_err();
        assert!(e.message.contains("`domain`") && e.line.is_none());
    }

    #[test]
    fn initial_specs_build() {
        assert_eq!(InitialSpec::Box { value: 2.0, radius: 1 }.build(2).unwrap().sum(), 18.0);
        let t = InitialSpec::Table { entries: vec![(vec![1, 0], 0.5), (vec![0, 0], 1.0)] };
        assert_eq!(t.build(2).unwrap().get(&Site::new(&[1, 0])), 0.5);
        assert!(t.build(1).is_err());
        assert!(Override::parse_assignment("novalue").is_err());
        assert!(Override::parse_assignment("a..b=1").is_err());
    }
}
