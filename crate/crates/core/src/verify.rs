//! Property suites run by the `verify` subcommand.
//!
//! Each suite either checks an identity on sampled paths or compares Monte Carlo
//! estimates against an exact oracle. Suites whose hypotheses the configuration
//! does not meet are reported as skipped with the reason.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::lattice::LatticeField;
use crate::moments::{exact_second_moment, mc_moments, McOptions, MomentTarget};
use crate::noise::NoiseMode;
use crate::parallel::fold_replicas;
use crate::solver::{
    comparison_condition, duhamel_eval, evolve, growth_step_holds, paired_comparison, picard_solve, support_metrics,
    Domain, PicardOptions, Problem,
};

/// Monte Carlo agreement margin, in standard errors.
pub const ORACLE_SIGMAS: f64 = 5.0;

/// Relative tolerance of pathwise identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub status: Status,
    /// Number of individual comparisons made.
    pub checks: u64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.status != Status::Fail)
    }

    /// Fixed-width table, one suite per line.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for r in &self.suites {
            let _ = writeln!(s, "{:<14} {:<4} {:>9}  {}", r.name, r.status.label(), r.checks, r.detail);
        }
        s
    }
}

fn skipped(name: &'static str, why: impl Into<String>) -> SuiteResult {
    SuiteResult { name, status: Status::Skipped, checks: 0, detail: why.into() }
}

fn verdict(name: &'static str, ok: bool, checks: u64, detail: String) -> SuiteResult {
    SuiteResult { name, status: if ok { Status::Pass } else { Status::Fail }, checks, detail }
}

/// duhamel_eval against evolve at every step.
fn duhamel_suite(problem: &Problem, cfg: &RunConfig) -> Result<SuiteResult> {
    let n_max = cfg.verify.n_max;
    let paths = cfg.verify.paths.min(20).max(1);
    let (worst, checks) = fold_replicas(
        paths,
        || (0.0f64, 0u64),
        |acc, r| {
            let t = evolve(problem, n_max, cfg.seed, r)?;
            for n in 0..n_max {
                let d = duhamel_eval(problem, &t, n)?;
                let scale = t.field(n + 1).sup_norm().max(1.0);
                acc.0 = acc.0.max(d.max_abs_diff(t.field(n + 1)) / scale);
                acc.1 += 1;
            }
            Ok(())
        },
        |a, b| {
            a.0 = a.0.max(b.0);
            a.1 += b.1;
        },
    )?;
    Ok(verdict("duhamel", worst <= IDENTITY_TOLERANCE, checks, format!("max scaled discrepancy {worst:.3e}")))
}

/// Finite propagation R_{n+1} <= R_n + R and the one-step sup growth bound.
fn support_suite(problem: &Problem, cfg: &RunConfig) -> Result<SuiteResult> {
    if problem.domain != Domain::Unbounded {
        return Ok(skipped("support", "needs the unbounded domain"));
    }
    let n_max = cfg.verify.n_max;
    let (bad, checks) = fold_replicas(
        cfg.verify.paths,
        || (0u64, 0u64),
        |acc, r| {
            let t = evolve(problem, n_max, cfg.seed, r)?;
            for row in support_metrics(&t, &problem.kernel) {
                acc.0 += u64::from(!row.recursion_holds);
                acc.1 += 1;
            }
            for n in 0..n_max {
                let ok = growth_step_holds(t.field(n).sup_norm(), t.field(n + 1).sup_norm(), &problem.sigma, &problem.noise);
                acc.0 += u64::from(!ok);
                acc.1 += 1;
            }
            Ok(())
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
        },
    )?;
    Ok(verdict("support", bad == 0, checks, format!("{bad} violations of radius recursion or growth bound")))
}

/// Pathwise ordering and positivity when P_00 >= C_xi Lip_sigma.
fn comparison_suite(problem: &Problem, cfg: &RunConfig) -> Result<SuiteResult> {
    let c = comparison_condition(&problem.kernel, &problem.sigma, &problem.noise);
    if !c.holds {
        return Ok(skipped(
            "comparison",
            format!("condition P_00 = {} >= C_xi Lip = {} fails", c.stay_probability, c.noise_bound * c.lip),
        ));
    }
    let positive = problem.u0.iter().all(|(_, v)| v >= 0.0);
    let v0 = problem.u0.map(|v| if v > 0.0 { 0.5 * v } else { 2.0 * v });
    let (bad, first) = fold_replicas(
        cfg.verify.paths,
        || (0u64, None::<String>),
        |acc, r| {
            let rep = paired_comparison(problem, &v0, cfg.verify.n_max, cfg.seed, r)?;
            if !rep.ordered || (positive && !rep.nonnegative) {
                acc.0 += 1;
                if acc.1.is_none() {
                    acc.1 = Some(format!("replica {r}: {:?}", rep.first_violation));
                }
            }
            Ok(())
        },
        |a, b| {
            a.0 += b.0;
            if a.1.is_none() {
                a.1 = b.1;
            }
        },
    )?;
    let what = if positive { "ordering and positivity" } else { "ordering" };
    let detail = match first {
        Some(f) => format!("{bad} paths break {what}; first {f}"),
        None => format!("{what} held on every path"),
    };
    Ok(verdict("comparison", bad == 0, cfg.verify.paths, detail))
}

/// Successive Picard distance ratios against c_p Lip sqrt(Upsilon(lambda^2)).
fn picard_suite(problem: &Problem, cfg: &RunConfig) -> Result<SuiteResult> {
    let p = &cfg.picard;
    let opts = PicardOptions { iterations: p.iterations, n_max: p.n_max, lambda: p.lambda, p: p.p, replicas: p.replicas, seed: cfg.seed };
    let rep = picard_solve(problem, &opts)?;
    if let Some(w) = rep.warning {
        return Ok(skipped("picard", w));
    }
    let ratios: Vec<_> = rep.ratios.iter().flatten().collect();
    let bad = ratios.iter().filter(|r| r.value > rep.predicted_factor + 3.0 * r.stderr).count();
    let worst = ratios.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(verdict(
        "picard",
        bad == 0,
        ratios.len() as u64,
        format!("largest ratio {worst:.4} against factor {:.4}", rep.predicted_factor),
    ))
}

/// Monte Carlo moments against exact values: E u_n = P^n u_0, and E u_n^2 from the renewal recursion.
fn oracle_suite(problem: &Problem, cfg: &RunConfig) -> Result<Vec<SuiteResult>> {
    let white = problem.noise.is_white() && problem.noise.mode() == NoiseMode::Spacetime;
    let nu = problem.sigma.linear_coefficient();
    let (Some(nu), true, Domain::Unbounded) = (nu, white, problem.domain) else {
        let why = "needs linear sigma, white space-time noise and the unbounded domain";
        return Ok(vec![skipped("mean_field", why), skipped("second_moment", why)]);
    };
    let n_max = cfg.verify.n_max;
    let mc = mc_moments(
        problem,
        &McOptions { target: MomentTarget::AllSites, p_grid: vec![1.0, 2.0], n_max, replicas: cfg.verify.oracle_replicas, seed: cfg.seed, signed: true },
    )?;
    let exact = exact_second_moment(&problem.kernel, &problem.u0, nu.abs(), n_max)?;
    let mut mean = problem.u0.clone();
    let mut out = Vec::new();
    for (k, series) in mc.iter().enumerate() {
        let (mut bad, mut checks, mut worst) = (0u64, 0u64, 0.0f64);
        for n in 0..=n_max {
            let truth: &LatticeField = if k == 0 { &mean } else { &exact.fields[n] };
            for x in series.regions[n].sites() {
                let e = series.at(n, &x);
                let t = truth.get(&x);
                let err = (e.value - t).abs();
                let ok = if e.stderr > 0.0 {
                    worst = worst.max(err / e.stderr);
                    err <= ORACLE_SIGMAS * e.stderr
                } else {
                    err <= 1e-12 * t.abs().max(f64::MIN_POSITIVE)
                };
                bad += u64::from(!ok);
                checks += 1;
            }
            if k == 0 {
                mean = problem.kernel.apply(&mean);
            }
        }
        let name = if k == 0 { "mean_field" } else { "second_moment" };
        out.push(verdict(name, bad == 0, checks, format!("{bad} cells outside {ORACLE_SIGMAS} SE, largest z {worst:.2}")));
    }
    Ok(out)
}

/// Runs every suite on the configured problem.
pub fn run_suites(problem: &Problem, cfg: &RunConfig) -> Result<VerifyReport> {
    let mut suites = vec![
        duhamel_suite(problem, cfg)?,
        support_suite(problem, cfg)?,
        comparison_suite(problem, cfg)?,
        picard_suite(problem, cfg)?,
    ];
    suites.extend(oracle_suite(problem, cfg)?);
    Ok(VerifyReport { suites })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::resolve;

    #[test]
    fn default_config_passes() {
        let (cfg, setup) = resolve(None, &[]).unwrap();
        let r = run_suites(&setup.problem(&cfg).unwrap(), &cfg).unwrap();
        assert!(r.passed(), "{}", r.table());
        assert!(r.suites.iter().all(|s| s.status == Status::Pass), "{}", r.table());
    }

    #[test]
    fn unmet_hypotheses_are_skipped() {
        let o = vec![
            crate::config::Override::parse_assignment("kernel={\"kind\":\"simple\",\"dim\":1}").unwrap(),
            crate::config::Override::parse_assignment("noise.white=false").unwrap(),
            crate::config::Override::parse_assignment("noise.scale=2").unwrap(),
            crate::config::Override::parse_assignment("verify.paths=5").unwrap(),
        ];
        let (cfg, setup) = resolve(None, &o).unwrap();
        let r = run_suites(&setup.problem(&cfg).unwrap(), &cfg).unwrap();
        let status = |n: &str| r.suites.iter().find(|s| s.name == n).unwrap().status;
        assert_eq!(status("comparison"), Status::Skipped);
        assert_eq!(status("second_moment"), Status::Skipped);
        assert_eq!(status("duhamel"), Status::Pass);
    }
}
