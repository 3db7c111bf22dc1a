//! Monte Carlo moment series over independent replicas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, Site};
use crate::parallel::fold_replicas;
use crate::solver::{evolve_with, NoisePath, Problem};
use crate::stats::{CellStats, Estimate};

/// What the moment is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentTarget {
    /// u_n(x) at one site.
    Site(Site),
    /// M_n = sup_x |u_n(x)|.
    SupNorm,
    /// u_n(x) at every site of the envelope of step n.
    AllSites,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub target: MomentTarget,
    pub p_grid: Vec<f64>,
    pub n_max: usize,
    pub replicas: u64,
    pub seed: u64,
    /// E[u^p] instead of E[|u|^p].
    #[serde(default)]
    pub signed: bool,
}

/// Estimates of E[|u_n|^p] (or E[u_n^p]) for n = 0..=n_max.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentSeries {
    pub p: f64,
    pub target: MomentTarget,
    pub signed: bool,
    pub replicas: u64,
    /// Sites of each step for `AllSites`; a single box otherwise.
    pub regions: Vec<BoxRegion>,
    /// values[n][i] for the i-th site of regions[n].
    pub values: Vec<Vec<Estimate>>,
}

impl MomentSeries {
    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// Per-step estimates for `Site` and `SupNorm` targets.
    pub fn scalar(&self) -> Vec<Estimate> {
        self.values.iter().map(|v| v[0]).collect()
    }

    /// Estimate at (n, x) for `AllSites`, zero outside the envelope.
    pub fn at(&self, n: usize, x: &Site) -> Estimate {
        match self.regions[n].index_of(x) {
            Some(i) => self.values[n][i],
            None => Estimate { value: 0.0, stderr: 0.0 },
        }
    }
}

fn power(v: f64, p: f64, signed: bool) -> Result<f64> {
    if !signed {
        return Ok(v.abs().powf(p));
    }
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        return Ok(v.powi(p as i32));
    }
    if v < 0.0 {
        return Err(Error::Estimation(format!("signed moment of order {p} of a negative value")));
    }
    Ok(v.powf(p))
}

pub fn mc_moments(problem: &Problem, opts: &McOptions) -> Result<Vec<MomentSeries>> {
    if opts.replicas < 2 {
        return Err(Error::Domain("at least two replicas are needed".into()));
    }
    if let Some(p) = opts.p_grid.iter().find(|p| !(**p >= 1.0)) {
        return Err(Error::Domain(format!("moment orders must be >= 1, got {p}")));
    }
    if let MomentTarget::Site(x) = opts.target {
        if (problem.dim()..3).any(|i| x.0[i] != 0) {
            return Err(Error::Domain(format!("site {x} has coordinates beyond dimension {}", problem.dim())));
        }
    }
    let regions: Vec<BoxRegion> = (0..=opts.n_max)
        .map(|n| match opts.target {
            MomentTarget::Site(x) => BoxRegion::single(problem.dim(), x),
            MomentTarget::SupNorm => BoxRegion::single(problem.dim(), Site::ORIGIN),
            MomentTarget::AllSites => problem.envelope(n),
        })
        .collect();
    let mut offsets = Vec::with_capacity(regions.len() + 1);
    offsets.push(0);
    for r in &regions {
        offsets.push(offsets.last().unwrap() + r.volume());
    }
    let per_p = *offsets.last().unwrap();
    let cells = per_p * opts.p_grid.len();

    let stats = fold_replicas(
        opts.replicas,
        || CellStats::new(cells),
        |acc, r| {
            let path = NoisePath::new(problem.noise, opts.seed, r);
            let mut sample = vec![0.0; cells];
            evolve_with(problem, opts.n_max, &path, |n, u| {
                let raw: Vec<f64> = match opts.target {
                    MomentTarget::Site(x) => vec![u.get(&x)],
                    MomentTarget::SupNorm => vec![u.sup_norm()],
                    MomentTarget::AllSites => u.values_on(&regions[n]),
                };
                for (k, p) in opts.p_grid.iter().enumerate() {
                    let base = k * per_p + offsets[n];
                    for (i, v) in raw.iter().enumerate() {
                        sample[base + i] = power(*v, *p, opts.signed)?;
                    }
                }
                Ok(())
            })?;
            acc.push(&sample);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;

    Ok(opts
        .p_grid
        .iter()
        .enumerate()
        .map(|(k, p)| MomentSeries {
            p: *p,
            target: opts.target,
            signed: opts.signed,
            replicas: opts.replicas,
            regions: regions.clone(),
            values: (0..=opts.n_max)
                .map(|n| (offsets[n]..offsets[n + 1]).map(|c| stats.estimate(k * per_p + c)).collect())
                .collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::WalkKernel;
    use crate::lattice::LatticeField;
    use crate::noise::{NoiseModel, NoiseSpec};
    use crate::solver::{Domain, SigmaSpec};

    fn opts(target: MomentTarget, p_grid: Vec<f64>, n_max: usize, replicas: u64) -> McOptions {
        McOptions { target, p_grid, n_max, replicas, seed: 17, signed: false }
    }

    #[test]
    fn noiseless_moments_are_deterministic() {
        let k = WalkKernel::lazy(1, 0.5).unwrap();
        let p = Problem::new(k.clone(), SigmaSpec::linear(0.0), NoiseModel::new(NoiseSpec::rademacher(1.0)).unwrap(), LatticeField::delta(1, Site::ORIGIN, 1.0), Domain::Unbounded).unwrap();
        let s = mc_moments(&p, &opts(MomentTarget::Site(Site::ORIGIN), vec![3.0], 6, 10)).unwrap();
        for (n, e) in s[0].scalar().iter().enumerate() {
            assert!((e.value - k.n_step(n).get(&Site::ORIGIN).powi(3)).abs() < 1e-15);
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn doubling_sup_moments() {
        let b = BoxRegion::centered(1, 30);
        let p = Problem::new(WalkKernel::simple(1).unwrap(), SigmaSpec::linear(1.0), NoiseModel::new(NoiseSpec::constant(1.0)).unwrap(), LatticeField::constant_on(b, 1.0), Domain::Boxed(b)).unwrap();
        let s = mc_moments(&p, &opts(MomentTarget::SupNorm, vec![1.0, 2.5], 10, 4)).unwrap();
        for series in &s {
            for (n, e) in series.scalar().iter().enumerate() {
                assert_eq!(e.value, 2f64.powf(n as f64 * series.p));
            }
        }
    }

    #[test]
    fn mean_field_is_kernel_power_within_errors() {
        let k = WalkKernel::simple(1).unwrap();
        let p = Problem::new(k.clone(), SigmaSpec::linear(1.0), NoiseModel::new(NoiseSpec::rademacher(1.0).white()).unwrap(), LatticeField::delta(1, Site::ORIGIN, 1.0), Domain::Unbounded).unwrap();
        let mut o = opts(MomentTarget::AllSites, vec![1.0], 8, 2000);
        o.signed = true;
        let s = &mc_moments(&p, &o).unwrap()[0];
        for n in 0..=8 {
            let expect = k.n_step(n);
            for x in s.regions[n].sites() {
                let e = s.at(n, &x);
                assert!((e.value - expect.get(&x)).abs() <= 5.0 * e.stderr + 1e-12);
            }
        }
    }

    #[test]
    fn bad_orders_rejected() {
        let p = Problem::new(WalkKernel::simple(1).unwrap(), SigmaSpec::linear(1.0), NoiseModel::new(NoiseSpec::rademacher(1.0)).unwrap(), LatticeField::delta(1, Site::ORIGIN, 1.0), Domain::Unbounded).unwrap();
        assert!(mc_moments(&p, &opts(MomentTarget::SupNorm, vec![0.5], 2, 4)).is_err());
        assert!(mc_moments(&p, &opts(MomentTarget::SupNorm, vec![2.0], 2, 1)).is_err());
    }
}
