//! Picard iteration f^(l+1)_{n+1} = P^{n+1} u_0 + (A f^(l))_n as a numerical diagnostic.
//!
//! Unrolling the stochastic convolution gives f^(l+1)_{n+1} = P f^(l+1)_n + sigma(f^(l)_n) xi_n,
//! so each sweep is the ordinary step with sigma read from the previous iterate.
//! Distances sup_n sup_x lambda^{-n} ||f^(l+1)_n(x) - f^(l)_n(x)||_p are estimated over replicas.

use serde::Serialize;

use super::{evolve_with, noise_region, step_split, NoisePath, Problem};
use crate::error::{Error, Result};
use crate::lattice::LatticeField;
use crate::parallel::fold_replicas;
use crate::spectral::{burkholder_constant, SpectralProfile};
use crate::stats::{CellStats, Estimate};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PicardOptions {
    /// Number of iterates f^(1), ..., f^(iterations) beyond f^(0) = u_0.
    pub iterations: usize,
    pub n_max: usize,
    pub lambda: f64,
    pub p: f64,
    pub replicas: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PicardReport {
    pub options: PicardOptions,
    /// c_p Lip_sigma sqrt(Upsilon(lambda^2)).
    pub predicted_factor: f64,
    pub warning: Option<String>,
    /// distances[l] estimates ||f^(l+1) - f^(l)||_{lambda,p}.
    pub distances: Vec<Estimate>,
    /// ratios[l] = distances[l+1] / distances[l] (None when the denominator vanishes).
    pub ratios: Vec<Option<Estimate>>,
    /// max_n max_x |f^(L)_n(x) - u_n(x)| for replica 0.
    pub terminal_discrepancy: f64,
}

fn iterate(problem: &Problem, path: &NoisePath, prev: &[LatticeField]) -> Result<Vec<LatticeField>> {
    let mut next = Vec::with_capacity(prev.len());
    next.push(problem.u0.clone());
    for n in 0..prev.len() - 1 {
        let xi = path.slice(n, &noise_region(problem, &prev[n], n))?;
        let target = match problem.resolved(n + 1) {
            Some(r) => r,
            None => next[n].bounds().dilate(problem.kernel.radius()).hull(prev[n].bounds()),
        };
        let f = step_split(&next[n], &prev[n], &problem.kernel, &problem.sigma, &xi, &target)?;
        next.push(f);
    }
    Ok(next)
}

pub fn picard_solve(problem: &Problem, opts: &PicardOptions) -> Result<PicardReport> {
    if opts.replicas < 2 {
        return Err(Error::Domain("Picard diagnostics need at least two replicas".into()));
    }
    if !(opts.lambda > 1.0) {
        return Err(Error::Domain(format!("lambda must exceed 1, got {}", opts.lambda)));
    }
    let c_p = burkholder_constant(opts.p)?;
    let profile = SpectralProfile::new(&problem.kernel);
    let predicted_factor = c_p * problem.sigma.lip() * profile.upsilon_series(opts.lambda * opts.lambda)?.value.sqrt();
    let warning = (predicted_factor >= 1.0)
        .then(|| format!("predicted factor {predicted_factor:.6} >= 1: no contraction is guaranteed"));

    let grid = problem.envelope(opts.n_max).hull(problem.u0.bounds());
    let (steps, sites) = (opts.n_max + 1, grid.volume());
    let cells = opts.iterations * steps * sites;
    let p = opts.p;
    let stats = fold_replicas(
        opts.replicas,
        || CellStats::new(cells),
        |acc, r| {
            let path = NoisePath::new(problem.noise, opts.seed, r);
            let mut sample = vec![0.0; cells];
            let mut prev = vec![problem.u0.clone(); steps];
            for l in 0..opts.iterations {
                let next = iterate(problem, &path, &prev)?;
                for n in 0..steps {
                    let (a, b) = (next[n].values_on(&grid), prev[n].values_on(&grid));
                    let base = (l * steps + n) * sites;
                    for i in 0..sites {
                        sample[base + i] = (a[i] - b[i]).abs().powf(p);
                    }
                }
                prev = next;
            }
            acc.push(&sample);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;

    let mut distances = Vec::with_capacity(opts.iterations);
    for l in 0..opts.iterations {
        let mut best = Estimate { value: 0.0, stderr: 0.0 };
        for n in 0..steps {
            let w = opts.lambda.powi(-(n as i32));
            for i in 0..sites {
                let e = stats.estimate((l * steps + n) * sites + i);
                if e.value <= 0.0 {
                    continue;
                }
                let norm = e.value.powf(1.0 / p);
                let value = w * norm;
                if value > best.value {
                    // delta method for m^{1/p}
                    best = Estimate { value, stderr: w * norm / (p * e.value) * e.stderr };
                }
            }
        }
        distances.push(best);
    }
    let ratios = distances
        .windows(2)
        .map(|d| {
            (d[0].value > 0.0).then(|| {
                let r = d[1].value / d[0].value;
                let rel = ((d[1].stderr / d[1].value.max(f64::MIN_POSITIVE)).powi(2) + (d[0].stderr / d[0].value).powi(2)).sqrt();
                Estimate { value: r, stderr: if d[1].value > 0.0 { r * rel } else { 0.0 } }
            })
        })
        .collect();

    let path = NoisePath::new(problem.noise, opts.seed, 0);
    let mut prev = vec![problem.u0.clone(); steps];
    for _ in 0..opts.iterations {
        prev = iterate(problem, &path, &prev)?;
    }
    let mut terminal_discrepancy: f64 = 0.0;
    evolve_with(problem, opts.n_max, &path, |n, u| {
        terminal_discrepancy = terminal_discrepancy.max(u.max_abs_diff(&prev[n]));
        Ok(())
    })?;

    Ok(PicardReport { options: *opts, predicted_factor, warning, distances, ratios, terminal_discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::WalkKernel;
    use crate::lattice::Site;
    use crate::noise::{NoiseModel, NoiseSpec};
    use crate::solver::{Domain, SigmaSpec};

    fn problem(nu: f64) -> Problem {
        Problem::new(
            WalkKernel::simple(1).unwrap(),
            SigmaSpec::linear(nu),
            NoiseModel::new(NoiseSpec::rademacher(1.0).white()).unwrap(),
            LatticeField::delta(1, Site::ORIGIN, 1.0),
            Domain::Unbounded,
        )
        .unwrap()
    }

    fn opts(iterations: usize, n_max: usize) -> PicardOptions {
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        PicardOptions { iterations, n_max, lambda: golden.sqrt(), p: 2.0, replicas: 200, seed: 4 }
    }

    #[test]
    fn zero_sigma_converges_after_one_iterate() {
        let r = picard_solve(&problem(0.0), &opts(3, 8)).unwrap();
        assert!(r.distances[0].value > 0.0);
        assert_eq!(r.distances[1].value, 0.0);
        assert_eq!(r.distances[2].value, 0.0);
        assert_eq!(r.terminal_discrepancy, 0.0);
    }

    #[test]
    fn iterates_reach_the_solution_after_horizon_sweeps() {
        let r = picard_solve(&problem(0.3), &opts(9, 8)).unwrap();
        assert_eq!(r.terminal_discrepancy, 0.0);
        assert!((r.predicted_factor - 0.3).abs() < 1e-10);
        assert!(r.warning.is_none());
        assert_eq!(r.distances[8].value, 0.0);
    }

    #[test]
    fn measured_ratios_respect_predicted_factor() {
        let r = picard_solve(&problem(0.3), &opts(5, 10)).unwrap();
        for ratio in r.ratios.iter().flatten() {
            assert!(ratio.value <= r.predicted_factor + 3.0 * ratio.stderr, "{ratio:?}");
        }
    }

    #[test]
    fn large_factor_warns() {
        let mut o = opts(2, 4);
        o.lambda = 1.05;
        assert!(picard_solve(&problem(1.0), &o).unwrap().warning.is_some());
    }
}
