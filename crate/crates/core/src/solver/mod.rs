//! Forward evolution of u_{n+1}(x) = (P u_n)(x) + sigma(u_n(x)) xi_n(x),
//! the Duhamel form, Picard iteration, and structural checks.
//!
//! With sigma(0) = 0 a finitely supported field stays finitely supported and the
//! recursion is solved exactly on all of Z^d. Otherwise every site is forced, so
//! the problem carries a bounding box B and step n is reported on B shrunk by nR,
//! the sites whose dependency cone stays inside B.

mod duhamel;
mod picard;
pub mod sigma;
mod structure;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub use duhamel::duhamel_eval;
pub use picard::{picard_solve, PicardOptions, PicardReport};
pub use sigma::{CustomSigma, SigmaConstants, SigmaSpec};
pub use structure::{
    comparison_condition, growth_step_holds, paired_comparison, support_metrics, ComparisonVerdict, PairedReport,
    SupportRow,
};

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, WalkKernel};
use crate::lattice::{copy_overlap, BoxRegion, LatticeField};
use crate::noise::{NoiseModel, NoiseSlice, NoiseSpec, NoiseStream};
use crate::output::fmt_f64;

/// Where the recursion is resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// All of Z^d; needs sigma(0) = 0.
    Unbounded,
    /// Bounded box; step n is resolved on the box shrunk by nR.
    Boxed(BoxRegion),
}

/// Everything that determines a solution besides the noise realization.
#[derive(Clone, Debug)]
pub struct Problem {
    pub kernel: WalkKernel,
    pub sigma: SigmaSpec,
    pub noise: NoiseModel,
    pub u0: LatticeField,
    pub domain: Domain,
}

impl Problem {
    pub fn new(kernel: WalkKernel, sigma: SigmaSpec, noise: NoiseModel, u0: LatticeField, domain: Domain) -> Result<Problem> {
        let d = kernel.dim();
        if u0.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u0.dim() });
        }
        sigma.validate()?;
        let u0 = match domain {
            Domain::Unbounded => {
                if sigma.sigma0() != 0.0 {
                    return Err(Error::Assumption(
                        "sigma(0) != 0 forces every site; supply a bounding box for the resolved region".into(),
                    ));
                }
                u0
            }
            Domain::Boxed(b) => {
                if b.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: b.dim() });
                }
                if b.is_empty() {
                    return Err(Error::RegionTooSmall("bounding box is empty".into()));
                }
                u0.restrict(&b)
            }
        };
        Ok(Problem { kernel, sigma, noise, u0, domain })
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Sites at which u_n is resolved; `None` means all of Z^d.
    pub fn resolved(&self, n: usize) -> Option<BoxRegion> {
        match self.domain {
            Domain::Unbounded => None,
            Domain::Boxed(b) => Some(b.shrink(n as u64 * self.kernel.radius())),
        }
    }

    /// A box containing every site where u_n can be nonzero or is resolved.
    pub fn envelope(&self, n: usize) -> BoxRegion {
        match self.resolved(n) {
            Some(b) => b,
            None => self.u0.bounds().dilate(n as u64 * self.kernel.radius()),
        }
    }
}

/// The noise realization of one replica.
#[derive(Clone, Debug)]
pub struct NoisePath {
    model: NoiseModel,
    stream: NoiseStream,
    seed: u64,
    replica: u64,
}

impl NoisePath {
    pub fn new(model: NoiseModel, seed: u64, replica: u64) -> NoisePath {
        NoisePath { model, stream: NoiseStream::new(seed, replica), seed, replica }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn slice(&self, n: usize, region: &BoxRegion) -> Result<NoiseSlice> {
        self.model.sample_slice(&self.stream, n as u64, region)
    }
}

/// One step of the recursion.
///
/// With `resolved = None` the step is exact on Z^d (requires sigma(0) = 0 and
/// noise covering the support of `u`). With `Some(region)` the result is computed
/// on `region`, which must lie within the sites where `u` is known shrunk by R,
/// and the noise must cover every site of `region` where sigma(u) != 0.
pub fn step(
    u: &LatticeField,
    kernel: &WalkKernel,
    sigma: &SigmaSpec,
    xi: &NoiseSlice,
    resolved: Option<&BoxRegion>,
) -> Result<LatticeField> {
    if u.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: u.dim() });
    }
    let target = match resolved {
        Some(r) => *r,
        None => {
            if sigma.sigma0() != 0.0 {
                return Err(Error::Assumption("an unbounded step needs sigma(0) = 0".into()));
            }
            u.bounds().dilate(kernel.radius())
        }
    };
    step_split(u, u, kernel, sigma, xi, &target)
}

/// (P a)(x) + sigma(b(x)) xi(x) for x in `target`.
pub(crate) fn step_split(
    a: &LatticeField,
    b: &LatticeField,
    kernel: &WalkKernel,
    sigma: &SigmaSpec,
    xi: &NoiseSlice,
    target: &BoxRegion,
) -> Result<LatticeField> {
    if target.is_empty() {
        return Ok(LatticeField::zero(kernel.dim()));
    }
    let mut out = kernel.apply_on(a, target);
    let bv = b.values_on(target);
    let mut noise = vec![f64::NAN; target.volume()];
    copy_overlap(xi.region(), xi.values(), target, &mut noise);
    for i in 0..out.len() {
        let s = sigma.eval(bv[i]);
        if s != 0.0 {
            let x = noise[i];
            if x.is_nan() {
                return Err(Error::RegionTooSmall(format!(
                    "no noise sample at site {} for step {}",
                    target.site_at(i),
                    xi.step()
                )));
            }
            out[i] += s * x;
        }
    }
    Ok(LatticeField::from_dense(*target, out))
}

/// Sites where step n needs noise: the support of u_n, or the next resolved box.
pub(crate) fn noise_region(problem: &Problem, u: &LatticeField, n: usize) -> BoxRegion {
    match problem.resolved(n + 1) {
        Some(r) => r,
        None => *u.bounds(),
    }
}

/// Runs the recursion for `n_max` steps, calling `visit(n, u_n)` for n = 0..=n_max.
pub fn evolve_with(
    problem: &Problem,
    n_max: usize,
    path: &NoisePath,
    mut visit: impl FnMut(usize, &LatticeField) -> Result<()>,
) -> Result<LatticeField> {
    let mut u = problem.u0.clone();
    visit(0, &u)?;
    for n in 0..n_max {
        let xi = path.slice(n, &noise_region(problem, &u, n))?;
        let target = match problem.resolved(n + 1) {
            Some(r) => r,
            None => u.bounds().dilate(problem.kernel.radius()),
        };
        u = step_split(&u, &u, &problem.kernel, &problem.sigma, &xi, &target)?;
        visit(n + 1, &u)?;
    }
    Ok(u)
}

/// Run description stored with a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub kernel: KernelSpec,
    pub kernel_radius: u64,
    pub sigma: String,
    pub sigma_constants: SigmaConstants,
    pub noise: NoiseSpec,
    pub domain: Domain,
    pub seed: u64,
    pub replica: u64,
    pub n_max: usize,
}

/// u_0, ..., u_{n_max} of one replica.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub fields: Vec<LatticeField>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn field(&self, n: usize) -> &LatticeField {
        &self.fields[n]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn path(&self, problem: &Problem) -> NoisePath {
        NoisePath::new(problem.noise, self.meta.seed, self.meta.replica)
    }

    /// Rows `replica,n,x1..xd,value` for every nonzero resolved value.
    pub fn write_csv(&self, mut w: impl Write, header: bool) -> io::Result<()> {
        let d = self.fields.first().map_or(1, |f| f.dim());
        if header {
            let coords: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
            writeln!(w, "replica,n,{},value", coords.join(","))?;
        }
        for (n, f) in self.fields.iter().enumerate() {
            for (x, v) in f.iter() {
                let c: Vec<String> = x.coords(d).iter().map(|c| c.to_string()).collect();
                writeln!(w, "{},{},{},{}", self.meta.replica, n, c.join(","), fmt_f64(v))?;
            }
        }
        Ok(())
    }
}

/// The full trajectory of replica `replica` under master seed `seed`.
pub fn evolve(problem: &Problem, n_max: usize, seed: u64, replica: u64) -> Result<Trajectory> {
    let path = NoisePath::new(problem.noise, seed, replica);
    let mut fields = Vec::with_capacity(n_max + 1);
    evolve_with(problem, n_max, &path, |_, u| {
        fields.push(u.clone());
        Ok(())
    })?;
    let meta = TrajectoryMeta {
        kernel: problem.kernel.spec().clone(),
        kernel_radius: problem.kernel.radius(),
        sigma: problem.sigma.to_string(),
        sigma_constants: problem.sigma.constants(),
        noise: *problem.noise.spec(),
        domain: problem.domain,
        seed,
        replica,
        n_max,
    };
    Ok(Trajectory { fields, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;
    use proptest::prelude::*;

    fn s1(x: i64) -> Site {
        Site::new(&[x])
    }

    fn doubling_problem(r: i64) -> Problem {
        let b = BoxRegion::new(1, &[-r], &[r]).unwrap();
        Problem::new(
            WalkKernel::simple(1).unwrap(),
            SigmaSpec::linear(1.0),
            NoiseModel::new(NoiseSpec::constant(1.0)).unwrap(),
            LatticeField::constant_on(b, 1.0),
            Domain::Boxed(b),
        )
        .unwrap()
    }

    #[test]
    fn doubling_step_and_trajectory() {
        let p = doubling_problem(40);
        let t = evolve(&p, 30, 0, 0).unwrap();
        for n in 0..=30 {
            let f = t.field(n);
            let region = p.resolved(n).unwrap();
            assert_eq!(f.bounds(), &region);
            assert!(f.iter().all(|(_, v)| v == 2f64.powi(n as i32)));
        }
    }

    #[test]
    fn hand_evaluated_step() {
        let k = WalkKernel::simple(1).unwrap();
        let xi = NoiseSlice::from_values(0, BoxRegion::single(1, Site::ORIGIN), vec![-1.0]).unwrap();
        let u1 = step(&LatticeField::delta(1, Site::ORIGIN, 1.0), &k, &SigmaSpec::linear(1.0), &xi, None).unwrap();
        assert_eq!(u1.iter().collect::<Vec<_>>(), vec![(s1(-1), 0.5), (s1(0), -1.0), (s1(1), 0.5)]);
    }

    #[test]
    fn zero_sigma_step_is_transition() {
        let k = WalkKernel::lazy(1, 0.3).unwrap();
        let u = LatticeField::from_entries(1, [(s1(0), 1.0), (s1(2), -0.5)]).unwrap();
        let xi = NoiseSlice::from_values(0, BoxRegion::empty(1), vec![]).unwrap();
        let stepped = step(&u, &k, &SigmaSpec::linear(0.0), &xi, None).unwrap();
        assert_eq!(stepped, k.apply(&u));
    }

    #[test]
    fn missing_noise_is_an_error() {
        let k = WalkKernel::simple(1).unwrap();
        let xi = NoiseSlice::from_values(0, BoxRegion::single(1, s1(5)), vec![1.0]).unwrap();
        let err = step(&LatticeField::delta(1, Site::ORIGIN, 1.0), &k, &SigmaSpec::linear(1.0), &xi, None).unwrap_err();
        assert!(matches!(err, Error::RegionTooSmall(_)));
        let b = BoxRegion::centered(1, 3);
        let xi = NoiseSlice::from_values(0, BoxRegion::centered(1, 2), vec![1.0; 5]).unwrap();
        let u = LatticeField::constant_on(BoxRegion::centered(1, 4), 1.0);
        assert!(step(&u, &k, &SigmaSpec::affine(0.0, 1.0), &xi, Some(&b)).is_err());
    }

    #[test]
    fn unbounded_domain_requires_vanishing_sigma_at_zero() {
        let err = Problem::new(
            WalkKernel::simple(1).unwrap(),
            SigmaSpec::affine(1.0, 0.5),
            NoiseModel::new(NoiseSpec::rademacher(1.0)).unwrap(),
            LatticeField::delta(1, Site::ORIGIN, 1.0),
            Domain::Unbounded,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Assumption(_)));
    }

    #[test]
    fn zero_sigma_evolution_is_kernel_power() {
        let k = WalkKernel::lazy(2, 0.5).unwrap();
        let u0 = LatticeField::from_entries(2, [(Site::new(&[0, 0]), 1.0), (Site::new(&[1, -1]), 2.0)]).unwrap();
        let p = Problem::new(k.clone(), SigmaSpec::linear(0.0), NoiseModel::new(NoiseSpec::rademacher(1.0)).unwrap(), u0.clone(), Domain::Unbounded).unwrap();
        let t = evolve(&p, 6, 1, 0).unwrap();
        let mut expect = u0;
        for n in 0..=6 {
            assert!(t.field(n).max_abs_diff(&expect) < 1e-15);
            expect = k.apply(&expect);
        }
    }

    #[test]
    fn csv_export_has_one_row_per_nonzero_value() {
        let p = Problem::new(
            WalkKernel::simple(1).unwrap(),
            SigmaSpec::linear(1.0),
            NoiseModel::new(NoiseSpec::rademacher(1.0).white()).unwrap(),
            LatticeField::delta(1, Site::ORIGIN, 1.0),
            Domain::Unbounded,
        )
        .unwrap();
        let t = evolve(&p, 3, 11, 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: usize = t.fields.iter().map(|f| f.support_size()).sum();
        assert_eq!(text.lines().count(), rows + 1);
        assert!(text.starts_with("replica,n,x1,value\n2,0,0,1.0000000000000000e0\n"));
    }

    proptest! {
        #[test]
        fn evolution_is_deterministic(seed in any::<u64>(), rep in 0u64..100, nu in 0.0f64..1.5) {
            let p = Problem::new(
                WalkKernel::lazy(2, 0.4).unwrap(),
                SigmaSpec::linear(nu),
                NoiseModel::new(NoiseSpec::uniform(3f64.sqrt()).white()).unwrap(),
                LatticeField::delta(2, Site::ORIGIN, 1.0),
                Domain::Unbounded,
            ).unwrap();
            let a = evolve(&p, 5, seed, rep).unwrap();
            let b = evolve(&p, 5, seed, rep).unwrap();
            prop_assert_eq!(a.fields, b.fields);
        }
    }
}
