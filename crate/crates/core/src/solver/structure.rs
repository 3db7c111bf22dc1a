//! Finite support, comparison, positivity and growth checks on trajectories.

use serde::Serialize;

use super::{evolve_with, NoisePath, Problem, SigmaSpec, Trajectory};
use crate::error::{Error, Result};
use crate::kernel::WalkKernel;
use crate::lattice::LatticeField;
use crate::noise::NoiseModel;

/// Support data of u_n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SupportRow {
    pub n: usize,
    /// Max-norm radius of the support; `None` for the zero field.
    pub radius: Option<u64>,
    /// Number of nonzero sites.
    pub count: usize,
    /// Sites in the max-norm ball of radius R_0 + nR.
    pub ball_count: u64,
    /// R_n <= R_{n-1} + R (vacuous at n = 0 or when either field is zero).
    pub recursion_holds: bool,
}

/// R_n, support counts and the radius recursion along a trajectory.
pub fn support_metrics(trajectory: &Trajectory, kernel: &WalkKernel) -> Vec<SupportRow> {
    let r = kernel.radius();
    let d = kernel.dim() as u32;
    let r0 = trajectory.fields.first().and_then(|f| f.support_radius()).unwrap_or(0);
    let mut prev: Option<Option<u64>> = None;
    trajectory
        .fields
        .iter()
        .enumerate()
        .map(|(n, f)| {
            let radius = f.support_radius();
            let recursion_holds = match (prev, radius) {
                (Some(Some(p)), Some(c)) => c <= p + r,
                (Some(None), Some(_)) => false,
                _ => true,
            };
            prev = Some(radius);
            SupportRow {
                n,
                radius,
                count: f.support_size(),
                ball_count: (2 * (r0 + n as u64 * r) + 1).pow(d),
                recursion_holds,
            }
        })
        .collect()
}

/// ||u_{n+1}||_inf <= ||u_n||_inf (1 + C_sigma C_xi) + C~_sigma C_xi, with a relative rounding slack.
pub fn growth_step_holds(prev_sup: f64, next_sup: f64, sigma: &SigmaSpec, noise: &NoiseModel) -> bool {
    let k = sigma.constants();
    let c_xi = noise.bound();
    let ceiling = prev_sup * (1.0 + k.c_sigma * c_xi) + k.c_tilde * c_xi;
    next_sup <= ceiling * (1.0 + 1e-12)
}

/// Whether P_{0,0} >= C_xi Lip_sigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonVerdict {
    pub stay_probability: f64,
    pub noise_bound: f64,
    pub lip: f64,
    pub holds: bool,
}

pub fn comparison_condition(kernel: &WalkKernel, sigma: &SigmaSpec, noise: &NoiseModel) -> ComparisonVerdict {
    let (p00, c, l) = (kernel.stay_probability(), noise.bound(), sigma.lip());
    ComparisonVerdict { stay_probability: p00, noise_bound: c, lip: l, holds: p00 >= c * l }
}

/// Outcome of evolving u_0 >= v_0 on a shared noise path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedReport {
    pub steps: usize,
    /// u_n >= v_n at every site and step.
    pub ordered: bool,
    /// v_n >= 0 at every site and step (meaningful when v_0 >= 0).
    pub nonnegative: bool,
    /// First (n, site, u, v) where ordering failed.
    pub first_violation: Option<(usize, String, f64, f64)>,
}

/// Evolves `problem` (with initial data u_0) and the same problem started from `v0`.
pub fn paired_comparison(problem: &Problem, v0: &LatticeField, n_max: usize, seed: u64, replica: u64) -> Result<PairedReport> {
    if v0.dim() != problem.dim() {
        return Err(Error::DimensionMismatch { expected: problem.dim(), got: v0.dim() });
    }
    let lower = Problem::new(problem.kernel.clone(), problem.sigma.clone(), problem.noise, v0.clone(), problem.domain)?;
    let path = NoisePath::new(problem.noise, seed, replica);
    let mut vs = Vec::with_capacity(n_max + 1);
    evolve_with(&lower, n_max, &path, |_, v| {
        vs.push(v.clone());
        Ok(())
    })?;
    let mut report = PairedReport { steps: n_max, ordered: true, nonnegative: true, first_violation: None };
    evolve_with(problem, n_max, &path, |n, u| {
        let v = &vs[n];
        if v.iter().any(|(_, x)| x < 0.0) {
            report.nonnegative = false;
        }
        let region = u.bounds().hull(v.bounds());
        let (uu, vv) = (u.values_on(&region), v.values_on(&region));
        if report.ordered {
            if let Some(i) = (0..uu.len()).find(|&i| uu[i] < vv[i]) {
                report.ordered = false;
                report.first_violation = Some((n, region.site_at(i).to_string(), uu[i], vv[i]));
            }
        }
        Ok(())
    })?;
    Ok(report)
}
