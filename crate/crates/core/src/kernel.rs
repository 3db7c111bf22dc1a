//! Local random-walk transition kernels on Z^d.
//!
//! A [`WalkKernel`] is the one-step table z -> P_{0,z}; translation invariance
//! gives P_{x,y} = P_{0,y-x}. The transition operator acts as
//! (Pf)(x) = sum_z P_{0,z} f(x+z).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_dim, correlate, BoxRegion, LatticeField, Site};
use crate::quadrature::{default_points, torus_mean};

/// Tolerance on the total mass of a kernel table.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Largest admissible support radius for a custom table.
pub const MAX_KERNEL_RADIUS: u64 = 1 << 12;

/// How a kernel is described in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Simple symmetric walk: mass 1/(2d) on each unit neighbour.
    Simple { dim: usize },
    /// Stays put with probability `stay`, otherwise a simple-walk step.
    Lazy { dim: usize, stay: f64 },
    /// Explicit (offset, probability) pairs.
    Custom { dim: usize, table: Vec<(Vec<i64>, f64)> },
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Shorthand: `simple<d>` or `lazy<d>:<stay>`, e.g. `simple1`, `lazy2:0.5`.
    fn from_str(s: &str) -> Result<KernelSpec> {
        let bad = || Error::InvalidKernel(format!("unrecognised kernel shorthand `{s}` (expected simple<d> or lazy<d>:<stay>)"));
        if let Some(d) = s.strip_prefix("simple") {
            let dim = d.parse().map_err(|_| bad())?;
            return Ok(KernelSpec::Simple { dim });
        }
        if let Some(rest) = s.strip_prefix("lazy") {
            let (d, a) = rest.split_once(':').ok_or_else(bad)?;
            return Ok(KernelSpec::Lazy { dim: d.parse().map_err(|_| bad())?, stay: a.parse().map_err(|_| bad())? });
        }
        Err(bad())
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Simple { dim } => write!(f, "simple{dim}"),
            KernelSpec::Lazy { dim, stay } => write!(f, "lazy{dim}:{stay}"),
            KernelSpec::Custom { dim, table } => write!(f, "custom{dim}[{} entries]", table.len()),
        }
    }
}

/// Which route computes the overlap q_k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMethod {
    /// Sum of squares of the k-step table.
    Convolution,
    /// Torus mean of |phi|^{2k}.
    Quadrature,
}

/// One-step transition probabilities of a local random walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkKernel {
    spec: KernelSpec,
    dim: usize,
    entries: Vec<(Site, f64)>,
    radius: u64,
}

impl WalkKernel {
    pub fn new(spec: &KernelSpec) -> Result<WalkKernel> {
        match spec {
            KernelSpec::Simple { dim } => {
                check_dim(*dim).map_err(|e| Error::InvalidKernel(e.to_string()))?;
                let p = 1.0 / (2 * dim) as f64;
                Self::build(spec.clone(), *dim, unit_neighbours(*dim).map(|z| (z, p)).collect())
            }
            KernelSpec::Lazy { dim, stay } => {
                check_dim(*dim).map_err(|e| Error::InvalidKernel(e.to_string()))?;
                if !(*stay > 0.0 && *stay < 1.0) {
                    return Err(Error::InvalidKernel(format!("lazy stay probability must lie in (0, 1), got {stay}")));
                }
                let p = (1.0 - stay) / (2 * dim) as f64;
                let mut table: Vec<(Site, f64)> = unit_neighbours(*dim).map(|z| (z, p)).collect();
                table.push((Site::ORIGIN, *stay));
                Self::build(spec.clone(), *dim, table)
            }
            KernelSpec::Custom { dim, table } => {
                check_dim(*dim).map_err(|e| Error::InvalidKernel(e.to_string()))?;
                let mut entries = Vec::with_capacity(table.len());
                for (z, p) in table {
                    if z.len() != *dim {
                        return Err(Error::InvalidKernel(format!("offset {z:?} does not have {dim} coordinates")));
                    }
                    entries.push((Site::new(z), *p));
                }
                Self::build(spec.clone(), *dim, entries)
            }
        }
    }

    pub fn simple(dim: usize) -> Result<WalkKernel> {
        WalkKernel::new(&KernelSpec::Simple { dim })
    }

    pub fn lazy(dim: usize, stay: f64) -> Result<WalkKernel> {
        WalkKernel::new(&KernelSpec::Lazy { dim, stay })
    }

    pub fn custom(dim: usize, table: Vec<(Vec<i64>, f64)>) -> Result<WalkKernel> {
        WalkKernel::new(&KernelSpec::Custom { dim, table })
    }

    fn build(spec: KernelSpec, dim: usize, mut entries: Vec<(Site, f64)>) -> Result<WalkKernel> {
        let mut total = 0.0;
        for (z, p) in &entries {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidKernel(format!("probability {p} at offset {z} is negative or not finite")));
            }
            if z.max_norm() > MAX_KERNEL_RADIUS {
                return Err(Error::InvalidKernel(format!("offset {z} exceeds the supported radius {MAX_KERNEL_RADIUS}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidKernel(format!("probabilities sum to {total}, not 1")));
        }
        entries.retain(|(_, p)| *p != 0.0);
        entries.sort_by_key(|(z, _)| *z);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidKernel("duplicate offset in table".into()));
        }
        let radius = entries.iter().map(|(z, _)| z.max_norm()).max().unwrap_or(0);
        Ok(WalkKernel { spec, dim, entries, radius })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max-norm radius R of the support of P_{0,.}.
    pub fn radius(&self) -> u64 {
        self.radius
    }

    /// Nonzero (offset, probability) pairs in lexicographic offset order.
    pub fn entries(&self) -> &[(Site, f64)] {
        &self.entries
    }

    /// P_{x,y} = P_{0,y-x}.
    pub fn probability(&self, x: &Site, y: &Site) -> f64 {
        let z = y.sub(*x);
        self.entries.iter().find(|(o, _)| *o == z).map_or(0.0, |(_, p)| *p)
    }

    /// P_{0,0}.
    pub fn stay_probability(&self) -> f64 {
        self.probability(&Site::ORIGIN, &Site::ORIGIN)
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries.iter().all(|(z, p)| self.probability(&Site::ORIGIN, &z.neg()) == *p)
    }

    /// (Pf)(x) = sum_y P_{x,y} f(y) on the whole lattice.
    pub fn apply(&self, f: &LatticeField) -> LatticeField {
        let out = f.bounds().dilate(self.radius);
        LatticeField::from_dense(out, correlate(f, &self.entries, self.radius, &out))
    }

    /// (Pf)(x) evaluated only for x in `region`.
    pub fn apply_on(&self, f: &LatticeField, region: &BoxRegion) -> Vec<f64> {
        correlate(f, &self.entries, self.radius, region)
    }

    /// The n-step table z -> P^n_{0,z}.
    pub fn n_step(&self, n: usize) -> KernelSlice {
        let mut slice = KernelSlice::identity(self.dim);
        for _ in 0..n {
            slice = self.next_power(&slice);
        }
        slice
    }

    /// Tables P^0, P^1, ..., P^{n_max}.
    pub fn powers(&self, n_max: usize) -> Vec<KernelSlice> {
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(KernelSlice::identity(self.dim));
        for _ in 0..n_max {
            let next = self.next_power(out.last().expect("nonempty"));
            out.push(next);
        }
        out
    }

    // P^{n+1}_{0,z} = sum_w P_{0,w} P^n_{0,z-w}
    pub(crate) fn next_power(&self, slice: &KernelSlice) -> KernelSlice {
        KernelSlice::from_table(slice.steps + 1, self.next_power_table(&slice.table))
    }

    /// The table step of `next_power` without building the weight list.
    pub(crate) fn next_power_table(&self, table: &LatticeField) -> LatticeField {
        let reflected: Vec<(Site, f64)> = self.entries.iter().map(|(z, p)| (z.neg(), *p)).collect();
        let out = table.bounds().dilate(self.radius);
        LatticeField::from_dense(out, correlate(table, &reflected, self.radius, &out))
    }

    /// phi(xi) = sum_x e^{i x.xi} P_{0,x}.
    pub fn char_function(&self, xi: &[f64]) -> Complex64 {
        assert_eq!(xi.len(), self.dim, "frequency vector has wrong dimension");
        self.entries
            .iter()
            .map(|(z, p)| {
                let phase: f64 = z.coords(self.dim).iter().zip(xi).map(|(a, b)| *a as f64 * b).sum();
                Complex64::from_polar(*p, phase)
            })
            .sum()
    }

    /// |phi(xi)|^2.
    pub fn char_modulus_sq(&self, xi: &[f64]) -> f64 {
        self.char_function(xi).norm_sqr()
    }

    /// q_k = sum_z (P^k_{0,z})^2.
    pub fn overlap_q(&self, k: usize, method: OverlapMethod) -> f64 {
        match method {
            OverlapMethod::Convolution => self.n_step(k).sum_of_squares(),
            OverlapMethod::Quadrature => {
                // |phi|^{2k} is a trigonometric polynomial of degree 2kR per axis
                let points = default_points(self.dim).max(2 * k * self.radius as usize + 1);
                torus_mean(self.dim, points, |xi| self.char_modulus_sq(xi).powi(k as i32))
            }
        }
    }
}

fn unit_neighbours(dim: usize) -> impl Iterator<Item = Site> {
    (0..dim).flat_map(move |i| {
        [-1i64, 1].into_iter().map(move |s| {
            let mut c = [0; 3];
            c[i] = s;
            Site(c)
        })
    })
}

/// The n-step transition table z -> P^n_{0,z}.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSlice {
    steps: usize,
    table: LatticeField,
    weights: Vec<(Site, f64)>,
}

impl KernelSlice {
    fn identity(dim: usize) -> KernelSlice {
        KernelSlice::from_table(0, LatticeField::delta(dim, Site::ORIGIN, 1.0))
    }

    fn from_table(steps: usize, table: LatticeField) -> KernelSlice {
        let weights = table.iter().collect();
        KernelSlice { steps, table, weights }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn table(&self) -> &LatticeField {
        &self.table
    }

    pub fn get(&self, z: &Site) -> f64 {
        self.table.get(z)
    }

    /// Nonzero (offset, probability) pairs in lexicographic order.
    pub fn weights(&self) -> &[(Site, f64)] {
        &self.weights
    }

    pub fn radius(&self) -> u64 {
        self.table.support_radius().unwrap_or(0)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|(_, p)| p * p).sum()
    }

    /// sum_y P^n_{x,y} f(y) for x in `region`.
    pub fn apply_on(&self, f: &LatticeField, region: &BoxRegion) -> Vec<f64> {
        correlate(f, &self.weights, self.radius(), region)
    }

    /// Same as [`Self::apply_on`] with squared weights: sum_y (P^n_{x,y})^2 f(y).
    pub fn apply_squared_on(&self, f: &LatticeField, region: &BoxRegion) -> Vec<f64> {
        let sq: Vec<(Site, f64)> = self.weights.iter().map(|(z, p)| (*z, p * p)).collect();
        correlate(f, &sq, self.radius(), region)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    fn table_1d(k: &KernelSlice) -> Vec<(i64, f64)> {
        k.weights().iter().map(|(z, p)| (z.0[0], *p)).collect()
    }

    #[test]
    fn simple_one_dimensional_table() {
        let k = WalkKernel::simple(1).unwrap();
        assert_eq!(k.entries(), &[(s(-1), 0.5), (s(1), 0.5)]);
        assert_eq!(k.radius(), 1);
        assert_eq!(k.stay_probability(), 0.0);
    }

    #[test]
    fn lazy_splits_remaining_mass_uniformly() {
        let k = WalkKernel::lazy(1, 0.5).unwrap();
        assert_eq!(k.entries(), &[(s(-1), 0.25), (s(0), 0.5), (s(1), 0.25)]);
        let k2 = WalkKernel::lazy(2, 0.6).unwrap();
        assert_eq!(k2.entries().len(), 5);
        assert!((k2.probability(&Site::ORIGIN, &Site::new(&[0, 1])) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn custom_two_dimensional_table_accepted() {
        let k = WalkKernel::custom(2, vec![(vec![0, 0], 0.9), (vec![1, 0], 0.05), (vec![-1, 0], 0.05)]).unwrap();
        assert_eq!(k.radius(), 1);
        assert_eq!(k.stay_probability(), 0.9);
    }

    #[test]
    fn invalid_tables_rejected() {
        assert!(WalkKernel::custom(1, vec![(vec![0], 1.1), (vec![1], -0.1)]).is_err());
        assert!(WalkKernel::custom(1, vec![(vec![0], 0.5), (vec![1], 0.4999)]).is_err());
        assert!(WalkKernel::custom(1, vec![(vec![0], 0.5), (vec![0], 0.5)]).is_err());
        assert!(WalkKernel::custom(1, vec![(vec![0, 1], 1.0)]).is_err());
        assert!(WalkKernel::custom(1, vec![(vec![1 << 20], 1.0)]).is_err());
        assert!(WalkKernel::lazy(1, 1.0).is_err());
        assert!(WalkKernel::simple(4).is_err());
    }

    #[test]
    fn point_mass_table_has_radius_zero() {
        let k = WalkKernel::custom(1, vec![(vec![0], 1.0)]).unwrap();
        assert_eq!(k.radius(), 0);
    }

    #[test]
    fn transition_of_delta() {
        let k = WalkKernel::simple(1).unwrap();
        let f = k.apply(&LatticeField::delta(1, Site::ORIGIN, 1.0));
        assert_eq!(f.iter().collect::<Vec<_>>(), vec![(s(-1), 0.5), (s(1), 0.5)]);
        assert!(k.apply(&LatticeField::zero(1)).is_zero());
    }

    #[test]
    fn lazy_twice_matches_brute_force_convolution() {
        let k = WalkKernel::lazy(1, 0.5).unwrap();
        let once = k.apply(&LatticeField::delta(1, Site::ORIGIN, 1.0));
        let twice = k.apply(&once);
        let got: Vec<(i64, f64)> = twice.iter().map(|(z, v)| (z.0[0], v)).collect();
        assert_eq!(got, vec![(-2, 0.0625), (-1, 0.25), (0, 0.375), (1, 0.25), (2, 0.0625)]);
    }

    #[test]
    fn n_step_tables() {
        let k = WalkKernel::simple(1).unwrap();
        assert_eq!(table_1d(&k.n_step(0)), vec![(0, 1.0)]);
        assert_eq!(table_1d(&k.n_step(2)), vec![(-2, 0.25), (0, 0.5), (2, 0.25)]);
        assert_eq!(table_1d(&k.n_step(3)), vec![(-3, 0.125), (-1, 0.375), (1, 0.375), (3, 0.125)]);
    }

    #[test]
    fn n_step_is_forward_convolution_for_asymmetric_kernels() {
        // drift to the right: P^n_{0,z} lives on z >= 0
        let k = WalkKernel::custom(1, vec![(vec![0], 0.5), (vec![1], 0.5)]).unwrap();
        assert_eq!(table_1d(&k.n_step(2)), vec![(0, 0.25), (1, 0.5), (2, 0.25)]);
        // P applied to a delta gives x -> P_{x,0} = P_{0,-x}
        let f = k.apply(&k.apply(&LatticeField::delta(1, Site::ORIGIN, 1.0)));
        assert_eq!(f.get(&s(-2)), 0.25);
    }

    #[test]
    fn char_function_examples() {
        let k = WalkKernel::simple(1).unwrap();
        assert!((k.char_function(&[0.0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(k.char_function(&[std::f64::consts::FRAC_PI_2]).norm() < 1e-15);
        let l = WalkKernel::lazy(1, 0.5).unwrap();
        assert!(l.char_function(&[std::f64::consts::PI]).norm() < 1e-15);
    }

    #[test]
    fn overlap_examples() {
        let k = WalkKernel::simple(1).unwrap();
        let l = WalkKernel::lazy(1, 0.5).unwrap();
        for m in [OverlapMethod::Convolution, OverlapMethod::Quadrature] {
            assert!((k.overlap_q(0, m) - 1.0).abs() < 1e-12);
            assert!((k.overlap_q(1, m) - 0.5).abs() < 1e-12);
            assert!((k.overlap_q(3, m) - 0.3125).abs() < 1e-12);
            assert!((l.overlap_q(1, m) - 0.375).abs() < 1e-12);
        }
    }

    #[test]
    fn shorthand_parsing() {
        assert_eq!("simple2".parse::<KernelSpec>().unwrap(), KernelSpec::Simple { dim: 2 });
        assert_eq!("lazy1:0.5".parse::<KernelSpec>().unwrap(), KernelSpec::Lazy { dim: 1, stay: 0.5 });
        assert!("walk".parse::<KernelSpec>().is_err());
    }
}
