//! u_{n+1} = P^{n+1} u_0 + sum_{j=0}^{n} P^{n-j} [sigma(u_j) xi_j], evaluated term by term.

use super::{noise_region, Problem, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::LatticeField;

/// u_{n+1} rebuilt from u_0, ..., u_n of `trajectory` and the same noise path.
pub fn duhamel_eval(problem: &Problem, trajectory: &Trajectory, n: usize) -> Result<LatticeField> {
    if n >= trajectory.len() {
        return Err(Error::Domain(format!("trajectory has {} fields, need u_0..u_{n}", trajectory.len())));
    }
    let path = trajectory.path(problem);
    let powers = problem.kernel.powers(n + 1);
    let target = problem.envelope(n + 1);
    let mut acc = powers[n + 1].apply_on(&problem.u0, &target);
    for j in 0..=n {
        let u = trajectory.field(j);
        let region = noise_region(problem, u, j);
        let xi = path.slice(j, &region)?;
        let forcing: Vec<f64> =
            u.values_on(&region).iter().zip(xi.values()).map(|(v, x)| problem.sigma.eval(*v) * x).collect();
        let term = powers[n - j].apply_on(&LatticeField::from_dense(region, forcing), &target);
        for (a, t) in acc.iter_mut().zip(term) {
            *a += t;
        }
    }
    Ok(LatticeField::from_dense(target, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::WalkKernel;
    use crate::lattice::{BoxRegion, Site};
    use crate::noise::{NoiseModel, NoiseSpec};
    use crate::solver::{evolve, Domain, SigmaSpec};

    fn problem(nu: f64) -> Problem {
        Problem::new(
            WalkKernel::lazy(1, 0.5).unwrap(),
            SigmaSpec::linear(nu),
            NoiseModel::new(NoiseSpec::rademacher(1.0).white()).unwrap(),
            LatticeField::delta(1, Site::ORIGIN, 1.0),
            Domain::Unbounded,
        )
        .unwrap()
    }

    #[test]
    fn first_term_is_one_step() {
        let p = problem(0.8);
        let t = evolve(&p, 1, 3, 0).unwrap();
        assert!(duhamel_eval(&p, &t, 0).unwrap().max_abs_diff(t.field(1)) < 1e-15);
    }

    #[test]
    fn zero_sigma_reduces_to_kernel_power() {
        let p = problem(0.0);
        let t = evolve(&p, 8, 3, 0).unwrap();
        let k = p.kernel.n_step(8);
        assert!(duhamel_eval(&p, &t, 7).unwrap().max_abs_diff(k.table()) < 1e-15);
    }

    #[test]
    fn matches_evolve_on_random_configuration() {
        let p = problem(0.3);
        let t = evolve(&p, 11, 42, 7).unwrap();
        assert!(duhamel_eval(&p, &t, 10).unwrap().max_abs_diff(t.field(11)) < 1e-10);
    }

    #[test]
    fn matches_evolve_on_a_box_with_affine_sigma() {
        let b = BoxRegion::new(2, &[-6, -6], &[6, 6]).unwrap();
        let p = Problem::new(
            WalkKernel::lazy(2, 0.6).unwrap(),
            SigmaSpec::affine(0.4, 0.2),
            NoiseModel::new(NoiseSpec::uniform(3f64.sqrt()).white()).unwrap(),
            LatticeField::constant_on(BoxRegion::centered(2, 2), 1.0),
            Domain::Boxed(b),
        )
        .unwrap();
        let t = evolve(&p, 5, 9, 1).unwrap();
        for n in 0..5 {
            let d = duhamel_eval(&p, &t, n).unwrap();
            assert_eq!(d.bounds().dim(), 2);
            assert!(d.max_abs_diff(t.field(n + 1)) < 1e-12);
        }
    }
}
