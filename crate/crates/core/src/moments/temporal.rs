//! Temporal noise: u_{n+1} = P u_n + u_n xi_n with xi_n constant in space.
//!
//! Summing over sites gives U_{n+1} = (1 + xi_n) U_n for the total mass U_n,
//! so E U_n^p = U_0^p exp(n Gamma(p)) with Gamma(p) = ln E(1 + xi)^p.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::WalkKernel;
use crate::lattice::{LatticeField, Site};
use crate::noise::{NoiseMode, NoiseModel, NoiseStream};
use crate::parallel::fold_replicas;
use crate::solver::{evolve_with, Domain, NoisePath, Problem, SigmaSpec};
use crate::stats::{CellStats, Estimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalOptions {
    pub p_grid: Vec<f64>,
    /// Horizon of the lattice runs.
    pub n_max: usize,
    /// Number of lattice runs.
    pub paths: u64,
    /// Horizon of the total-mass moment check.
    pub moment_horizon: usize,
    /// Number of total-mass paths for the moment check.
    pub moment_paths: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaPoint {
    pub p: f64,
    pub gamma: f64,
}

/// Sample mean of U_n^p against its exact value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentCheck {
    pub n: usize,
    pub p: f64,
    pub mean: f64,
    pub stderr: f64,
    pub predicted: f64,
    /// Standard error implied by the exact variance e^{n Gamma(2p)} - e^{2n Gamma(p)}.
    pub analytic_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TemporalReport {
    pub gamma: Vec<GammaPoint>,
    /// Gamma'(0+) = E ln(1 + xi).
    pub gamma_prime_zero: f64,
    pub gamma_convex_on_grid: bool,
    pub u0_mass: f64,
    /// Largest |sum_x u_n(x) / (U_0 prod (1 + xi_j)) - 1| over all lattice paths and steps.
    pub identity_max_rel_error: f64,
    /// Mean over lattice paths of (1/n) ln M_n at n = n_max.
    pub log_sup_rate: Estimate,
    pub moment_checks: Vec<MomentCheck>,
}

/// Validates the temporal setting: bounded noise below 1 in size, C_xi <= P_{0,0} < 1, u_0 >= 0 with positive mass.
pub fn check_temporal_assumptions(kernel: &WalkKernel, noise: &NoiseModel, u0: &LatticeField) -> Result<()> {
    if noise.mode() != NoiseMode::Temporal {
        return Err(Error::Assumption("the temporal model needs noise in temporal mode".into()));
    }
    if noise.bound() >= 1.0 {
        return Err(Error::Assumption(format!("noise bound {} must be below 1 so that ln(1 + xi) is defined", noise.bound())));
    }
    let p00 = kernel.stay_probability();
    if !(p00 < 1.0 && noise.bound() <= p00) {
        return Err(Error::Assumption(format!("need C_xi <= P_00 < 1, have C_xi = {} and P_00 = {p00}", noise.bound())));
    }
    if u0.iter().any(|(_, v)| v < 0.0) || !(u0.sum() > 0.0) {
        return Err(Error::Assumption("initial data must be nonnegative with positive total mass".into()));
    }
    Ok(())
}

pub fn temporal_report(kernel: &WalkKernel, noise: &NoiseModel, u0: &LatticeField, opts: &TemporalOptions) -> Result<TemporalReport> {
    check_temporal_assumptions(kernel, noise, u0)?;
    if opts.paths == 0 || opts.n_max == 0 {
        return Err(Error::Domain("need at least one lattice path and one step".into()));
    }
    let mut grid = opts.p_grid.clone();
    grid.sort_by(f64::total_cmp);
    let gamma: Vec<GammaPoint> = grid.iter().map(|&p| GammaPoint { p, gamma: noise.log_moment_one_plus(p) }).collect();
    let gamma_convex_on_grid = gamma.windows(3).all(|w| {
        let (a, b, c) = (w[0], w[1], w[2]);
        let chord = a.gamma + (c.gamma - a.gamma) * (b.p - a.p) / (c.p - a.p);
        b.gamma <= chord + 1e-12 * (1.0 + chord.abs())
    });

    let u0_mass = u0.sum();
    let problem = Problem::new(kernel.clone(), SigmaSpec::linear(1.0), *noise, u0.clone(), Domain::Unbounded)?;
    let n_max = opts.n_max;
    // per path: (max identity error, (1/n) ln M_n)
    let lattice = fold_replicas(
        opts.paths,
        || (0.0f64, CellStats::new(1)),
        |acc, r| {
            let path = NoisePath::new(*noise, opts.seed, r);
            let stream = NoiseStream::new(opts.seed, r);
            let mut product = u0_mass;
            let mut rate = 0.0;
            evolve_with(&problem, n_max, &path, |n, u| {
                if n > 0 {
                    product *= 1.0 + noise.sample(&stream, n as u64 - 1, &Site::ORIGIN)?;
                }
                acc.0 = acc.0.max((u.sum() / product - 1.0).abs());
                if n == n_max {
                    rate = u.max_value().ln() / n as f64;
                }
                Ok(())
            })?;
            acc.1.push(&[rate]);
            Ok(())
        },
        |a, b| {
            a.0 = a.0.max(b.0);
            a.1.merge(&b.1);
        },
    )?;

    let h = opts.moment_horizon;
    let np = grid.len();
    let mut moment_checks = Vec::new();
    if h > 0 && opts.moment_paths > 0 {
        let stats = fold_replicas(
            opts.moment_paths,
            || CellStats::new(h * np),
            |acc, r| {
                let stream = NoiseStream::new(opts.seed, r);
                let mut sample = vec![0.0; h * np];
                let mut u = u0_mass;
                for n in 0..h {
                    u *= 1.0 + noise.sample(&stream, n as u64, &Site::ORIGIN)?;
                    for (k, p) in grid.iter().enumerate() {
                        sample[n * np + k] = u.powf(*p);
                    }
                }
                acc.push(&sample);
                Ok(())
            },
            |a, b| a.merge(&b),
        )?;
        for n in 1..=h {
            for (k, &p) in grid.iter().enumerate() {
                let e = stats.estimate((n - 1) * np + k);
                let g = noise.log_moment_one_plus(p);
                let var = u0_mass.powf(2.0 * p) * ((n as f64 * noise.log_moment_one_plus(2.0 * p)).exp() - (2.0 * n as f64 * g).exp());
                moment_checks.push(MomentCheck {
                    n,
                    p,
                    mean: e.value,
                    stderr: e.stderr,
                    predicted: u0_mass.powf(p) * (n as f64 * g).exp(),
                    analytic_stderr: (var.max(0.0) / opts.moment_paths as f64).sqrt(),
                });
            }
        }
    }

    Ok(TemporalReport {
        gamma,
        gamma_prime_zero: noise.mean_log_one_plus(),
        gamma_convex_on_grid,
        u0_mass,
        identity_max_rel_error: lattice.0,
        log_sup_rate: lattice.1.estimate(0),
        moment_checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;

    fn rademacher(a: f64) -> NoiseModel {
        NoiseModel::new(NoiseSpec::rademacher(a).temporal()).unwrap()
    }

    fn opts() -> TemporalOptions {
        TemporalOptions { p_grid: vec![0.0, 1.0, 2.0, 3.0], n_max: 60, paths: 20, moment_horizon: 10, moment_paths: 4000, seed: 8 }
    }

    #[test]
    fn gamma_examples() {
        let r = temporal_report(&WalkKernel::lazy(1, 0.5).unwrap(), &rademacher(0.4), &LatticeField::delta(1, Site::ORIGIN, 1.0), &opts()).unwrap();
        assert_eq!(r.gamma[0].gamma, 0.0);
        assert!(r.gamma[1].gamma.abs() < 1e-15);
        assert!((r.gamma[2].gamma - 0.148420005118273).abs() < 1e-12);
        assert!((r.gamma_prime_zero + 0.0871766935723889).abs() < 1e-12);
        assert!(r.gamma_convex_on_grid);
        assert!(r.gamma_prime_zero <= r.gamma[1].gamma);
        assert!(r.identity_max_rel_error < 1e-10);
        for c in &r.moment_checks {
            assert!((c.mean - c.predicted).abs() <= 6.0 * c.analytic_stderr + 1e-12, "{c:?}");
        }
    }

    #[test]
    fn assumptions_enforced() {
        let k = WalkKernel::lazy(1, 0.5).unwrap();
        let d = LatticeField::delta(1, Site::ORIGIN, 1.0);
        let space = NoiseModel::new(NoiseSpec::rademacher(0.4)).unwrap();
        assert!(temporal_report(&k, &space, &d, &opts()).is_err());
        assert!(temporal_report(&k, &rademacher(0.6), &d, &opts()).is_err());
        assert!(temporal_report(&WalkKernel::lazy(1, 0.99).unwrap(), &rademacher(1.0), &d, &opts()).is_err());
        assert!(temporal_report(&WalkKernel::simple(1).unwrap(), &rademacher(0.1), &d, &opts()).is_err());
        assert!(temporal_report(&k, &rademacher(0.4), &LatticeField::delta(1, Site::ORIGIN, -1.0), &opts()).is_err());
    }
}
