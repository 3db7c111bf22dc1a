//! Upsilon(lambda) = (2 pi)^{-d} int d xi / (lambda - |phi(xi)|^2) = lambda^{-1} sum_n lambda^{-n} q_n,
//! its extended inverse, and the moment-exponent bounds built from it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::WalkKernel;
use crate::lattice::{LatticeField, Site};
use crate::quadrature::{default_points, torus_mean, torus_mean_indexed, torus_nodes};
use crate::solver::SigmaSpec;

/// Default absolute tolerance of the series route.
pub const SERIES_TOLERANCE: f64 = 1e-13;

/// Relative tolerance of the inverse.
pub const INVERSE_TOLERANCE: f64 = 1e-13;

/// Inverse values closer than this to 1 are reported as 1.
pub const INVERSE_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsilonMethod {
    Quadrature,
    Series,
}

/// A series evaluation with its rigorous truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation_error: f64,
    pub terms: usize,
}

/// Largest number of cached overlaps for a given dimension.
pub fn q_cap(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 512,
        _ => 96,
    }
}

fn quadrature_cap(dim: usize) -> usize {
    match dim {
        1 => 1 << 17,
        2 => 2048,
        _ => 192,
    }
}

struct QCache {
    q: Vec<f64>,
    last: LatticeField,
}

/// Spectral data of one kernel, with a lazily grown cache of q_k.
pub struct SpectralProfile {
    kernel: WalkKernel,
    points: usize,
    tolerance: f64,
    cache: Mutex<QCache>,
    // |phi|^2 at the quadrature nodes, keyed by points per axis
    grids: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl SpectralProfile {
    pub fn new(kernel: &WalkKernel) -> SpectralProfile {
        let last = LatticeField::delta(kernel.dim(), Site::ORIGIN, 1.0);
        SpectralProfile {
            kernel: kernel.clone(),
            points: default_points(kernel.dim()),
            tolerance: SERIES_TOLERANCE,
            cache: Mutex::new(QCache { q: vec![1.0], last }),
            grids: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_points(mut self, points: usize) -> SpectralProfile {
        self.points = points.max(1);
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> SpectralProfile {
        self.tolerance = tolerance;
        self
    }

    pub fn kernel(&self) -> &WalkKernel {
        &self.kernel
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// q_0, ..., q_{n-1} (fewer if the cap is reached).
    pub fn overlaps(&self, n: usize) -> Vec<f64> {
        let n = n.min(q_cap(self.kernel.dim()));
        let mut c = self.cache.lock().expect("overlap cache poisoned");
        while c.q.len() < n {
            let next = self.kernel.next_power_table(&c.last);
            c.q.push(next.dense().iter().map(|p| p * p).sum());
            c.last = next;
        }
        c.q[..n].to_vec()
    }

    /// q_k from the cache (None beyond the cap).
    pub fn q(&self, k: usize) -> Option<f64> {
        self.overlaps(k + 1).get(k).copied()
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(lambda > 1.0) || lambda.is_nan() {
            return Err(Error::Domain(format!("Upsilon needs lambda > 1, got {lambda}")));
        }
        Ok(())
    }

    pub fn upsilon(&self, lambda: f64, method: UpsilonMethod) -> Result<f64> {
        match method {
            UpsilonMethod::Quadrature => self.upsilon_quadrature(lambda, self.points),
            UpsilonMethod::Series => Ok(self.upsilon_series(lambda)?.value),
        }
    }

    pub fn upsilon_quadrature(&self, lambda: f64, points: usize) -> Result<f64> {
        Self::check_lambda(lambda)?;
        if lambda.is_infinite() {
            return Ok(0.0);
        }
        Ok(torus_mean(self.kernel.dim(), points, |xi| 1.0 / (lambda - self.kernel.char_modulus_sq(xi))))
    }

    /// Partial sums until the tail bound q_N lambda^{-N-1} / (1 - 1/lambda) drops below the tolerance.
    ///
    /// q_n is nonincreasing because |phi| <= 1, which makes the bound rigorous.
    pub fn upsilon_series(&self, lambda: f64) -> Result<SeriesValue> {
        Self::check_lambda(lambda)?;
        if lambda.is_infinite() {
            return Ok(SeriesValue { value: 0.0, truncation_error: 0.0, terms: 0 });
        }
        let r = 1.0 / lambda;
        let cap = q_cap(self.kernel.dim());
        // terms needed if q_n were 1
        let want = ((self.tolerance * (1.0 - r)).ln() / r.ln()).ceil().max(1.0);
        let q = self.overlaps(if want.is_finite() { (want as usize).min(cap) } else { cap });
        let mut sum = 0.0;
        let mut w = r;
        let mut tail = f64::INFINITY;
        let mut terms = 0;
        for (n, qn) in q.iter().enumerate() {
            tail = qn * w / (1.0 - r);
            if tail < self.tolerance {
                break;
            }
            sum += qn * w;
            w *= r;
            terms = n + 1;
        }
        if terms == q.len() {
            // cap reached; the last available q majorizes the rest
            tail = q.last().copied().unwrap_or(1.0) * w / (1.0 - r);
        }
        Ok(SeriesValue { value: sum, truncation_error: tail, terms })
    }

    /// Equals `upsilon_quadrature` bit for bit, reusing the node values of |phi|^2.
    fn upsilon_quadrature_cached(&self, lambda: f64, points: usize) -> f64 {
        let dim = self.kernel.dim();
        let grid = {
            let mut g = self.grids.lock().expect("grid cache poisoned");
            g.entry(points).or_insert_with(|| Arc::new(torus_nodes(dim, points, |xi| self.kernel.char_modulus_sq(xi)))).clone()
        };
        torus_mean_indexed(dim, points, |i, _| 1.0 / (lambda - grid[i]))
    }

    /// Decides Upsilon(lambda) > x.
    fn exceeds(&self, lambda: f64, x: f64) -> bool {
        if let Ok(s) = self.upsilon_series(lambda) {
            if s.value > x {
                return true;
            }
            if s.value + s.truncation_error <= x {
                return false;
            }
        }
        // series undecided near lambda = 1: refine the quadrature until two levels agree
        let cap = quadrature_cap(self.kernel.dim());
        let mut n = self.points;
        let mut prev = self.upsilon_quadrature_cached(lambda, n);
        while n < cap {
            n = (2 * n).min(cap);
            let cur = self.upsilon_quadrature_cached(lambda, n);
            if (cur - prev).abs() <= 1e-12 * cur.abs() {
                return cur > x;
            }
            prev = cur;
        }
        prev > x
    }

    /// sup{lambda > 1 : Upsilon(lambda) > x}, with sup of the empty set = 1 and x = +inf mapped to 0.
    pub fn upsilon_inverse(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x <= 0.0 {
            return Err(Error::Domain(format!("Upsilon inverse needs x > 0, got {x}")));
        }
        if x.is_infinite() {
            return Ok(0.0);
        }
        if !self.exceeds(1.0 + INVERSE_FLOOR, x) {
            return Ok(1.0);
        }
        // Upsilon(lambda) <= 1/(lambda - 1), so 1 + 1/x is an upper bracket
        let mut hi = 2.0f64;
        while self.exceeds(hi, x) {
            hi = (2.0 * hi).max(1.0 + 1.0 / x);
        }
        let mut lo = 1.0f64;
        while hi - lo > INVERSE_TOLERANCE * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.exceeds(mid, x) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi - 1.0 <= INVERSE_FLOOR {
            return Ok(1.0);
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Constant in the martingale moment inequality: 1 at p = 2, 18 p sqrt(p/(p-1)) above.
pub fn burkholder_constant(p: f64) -> Result<f64> {
    if p.is_nan() || p < 2.0 {
        return Err(Error::Domain(format!("Burkholder constant needs p >= 2, got {p}")));
    }
    if p == 2.0 {
        return Ok(1.0);
    }
    Ok(18.0 * p * (p / (p - 1.0)).sqrt())
}

/// Upper and lower bounds on the p-th moment exponent of ln ||u_n||_p.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub p: f64,
    pub c_p: f64,
    pub lip: f64,
    pub l_sigma: f64,
    /// Upsilon^{-1}((c_p Lip)^{-2}).
    pub upper_inverse: f64,
    /// Upsilon^{-1}(L_sigma^{-2}).
    pub lower_inverse: f64,
    pub upper: f64,
    pub lower: f64,
}

pub fn liapounov_bounds(profile: &SpectralProfile, p: f64, sigma: &SigmaSpec) -> Result<BoundReport> {
    let c_p = burkholder_constant(p)?;
    let k = sigma.constants();
    let arg = |c: f64| if c == 0.0 { f64::INFINITY } else { 1.0 / (c * c) };
    let upper_inverse = profile.upsilon_inverse(arg(c_p * k.lip))?;
    let lower_inverse = profile.upsilon_inverse(arg(k.l_sigma))?;
    Ok(BoundReport {
        p,
        c_p,
        lip: k.lip,
        l_sigma: k.l_sigma,
        upper_inverse,
        lower_inverse,
        upper: 0.5 * upper_inverse.ln(),
        lower: 0.5 * lower_inverse.ln(),
    })
}

/// Closed forms for the one-dimensional simple walk.
pub mod simple_walk {
    /// q_n = (2n-1)!!/(2n)!!.
    pub fn q(n: usize) -> f64 {
        (1..=n).fold(1.0, |acc, k| acc * (2 * k - 1) as f64 / (2 * k) as f64)
    }

    /// sum_n q_n lambda^{-n} = (1 - 1/lambda)^{-1/2} = lambda Upsilon(lambda).
    pub fn generating_function(lambda: f64) -> f64 {
        (1.0 - 1.0 / lambda).powf(-0.5)
    }

    pub fn upsilon(lambda: f64) -> f64 {
        1.0 / (lambda * (lambda - 1.0)).sqrt()
    }

    /// Root of lambda (lambda - 1) = x^{-2}.
    pub fn upsilon_inverse(x: f64) -> f64 {
        if x.is_infinite() {
            return 0.0;
        }
        0.5 * (1.0 + (1.0 + 4.0 / (x * x)).sqrt())
    }

    /// 1F1(1/2; 1; z) = sum_n (1/2)_n z^n / (n!)^2, reported for comparison only.
    pub fn kummer_half_one(z: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..500 {
            term *= (0.5 + n as f64) * z / ((n + 1) as f64 * (n + 1) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::OverlapMethod;
    use proptest::prelude::*;

    fn golden() -> f64 {
        0.5 * (1.0 + 5f64.sqrt())
    }

    // shared so the overlap cache is built once
    fn simple1() -> &'static SpectralProfile {
        static P: std::sync::OnceLock<SpectralProfile> = std::sync::OnceLock::new();
        P.get_or_init(|| SpectralProfile::new(&WalkKernel::simple(1).unwrap()))
    }

    #[test]
    fn upsilon_examples() {
        let s = simple1();
        for m in [UpsilonMethod::Quadrature, UpsilonMethod::Series] {
            assert!((s.upsilon(2.0, m).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
            assert!((s.upsilon(golden(), m).unwrap() - 1.0).abs() < 1e-10);
            assert!(s.upsilon(1e6, m).unwrap() < 2e-6);
        }
        assert!(s.upsilon(1.0, UpsilonMethod::Series).is_err());
        assert!(s.upsilon(0.5, UpsilonMethod::Quadrature).is_err());
    }

    #[test]
    fn cached_quadrature_is_bitwise_equal() {
        let p = SpectralProfile::new(&WalkKernel::lazy(2, 0.3).unwrap());
        for l in [1.01, 1.5, 4.0] {
            assert_eq!(p.upsilon_quadrature_cached(l, 64).to_bits(), p.upsilon_quadrature(l, 64).unwrap().to_bits());
        }
    }

    #[test]
    fn series_reports_truncation() {
        let v = simple1().upsilon_series(1.5).unwrap();
        assert!(v.truncation_error < SERIES_TOLERANCE && v.terms > 10);
        let near = simple1().upsilon_series(1.0 + 1e-6).unwrap();
        assert!(near.truncation_error > 1e-3);
    }

    #[test]
    fn inverse_examples() {
        let s = simple1();
        assert!((s.upsilon_inverse(1.0).unwrap() - golden()).abs() < 1e-10);
        assert!((s.upsilon_inverse(0.5f64.sqrt()).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(s.upsilon_inverse(f64::INFINITY).unwrap(), 0.0);
        assert!(s.upsilon_inverse(0.0).is_err());
        assert!(s.upsilon_inverse(-1.0).is_err());
    }

    #[test]
    fn transient_kernel_inverse_hits_floor() {
        // d = 3 is transient: Upsilon(1+) is finite, so large x gives the empty set
        let s = SpectralProfile::new(&WalkKernel::simple(3).unwrap());
        assert_eq!(s.upsilon_inverse(50.0).unwrap(), 1.0);
        let x = 0.3;
        let l = s.upsilon_inverse(x).unwrap();
        assert!(l > 1.0 && (s.upsilon(l, UpsilonMethod::Series).unwrap() - x).abs() < 1e-8);
    }

    #[test]
    fn burkholder_examples() {
        assert_eq!(burkholder_constant(2.0).unwrap(), 1.0);
        assert!((burkholder_constant(4.0).unwrap() - 83.13843876330611).abs() < 1e-9);
        assert!((burkholder_constant(3.0).unwrap() - 66.1362230551458).abs() < 1e-9);
        assert!(burkholder_constant(1.5).is_err());
    }

    #[test]
    fn bound_examples() {
        let s = simple1();
        let b = liapounov_bounds(&s, 2.0, &SigmaSpec::linear(1.0)).unwrap();
        assert!((b.upper - 0.2406059125298).abs() < 1e-9);
        assert!((b.lower - b.upper).abs() < 1e-12);
        let zero = liapounov_bounds(&s, 2.0, &SigmaSpec::linear(0.0)).unwrap();
        assert_eq!(zero.upper, f64::NEG_INFINITY);
        // quadratic solve oracle: lambda (lambda - 1) = 1/16
        let lower_inverse = s.upsilon_inverse(4.0).unwrap();
        let oracle = 0.5 * (1.0 + 1.25f64.sqrt());
        assert!((lower_inverse - oracle).abs() < 1e-10);
        assert!((0.5 * oracle.ln() - 0.0286705570).abs() < 1e-9);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(simple_walk::q(2), 0.375);
        assert!((simple_walk::generating_function(2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((simple_walk::upsilon_inverse(1.0) - golden()).abs() < 1e-15);
        assert!((simple_walk::upsilon_inverse(1.0) - simple1().upsilon_inverse(1.0).unwrap()).abs() < 1e-10);
        // the Kummer value differs from the generating function
        assert!((simple_walk::kummer_half_one(0.5) - simple_walk::generating_function(2.0)).abs() > 0.1);
    }

    #[test]
    fn cached_overlaps_match_kernel() {
        let k = WalkKernel::lazy(2, 0.3).unwrap();
        let s = SpectralProfile::new(&k);
        let q = s.overlaps(12);
        for (i, v) in q.iter().enumerate() {
            assert!((v - k.overlap_q(i, OverlapMethod::Convolution)).abs() < 1e-12);
        }
    }

    #[test]
    fn double_factorial_identity() {
        let q = simple1().overlaps(21);
        for (n, v) in q.iter().enumerate() {
            assert!((v - simple_walk::q(n)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn upsilon_strictly_decreasing(a in 1.05f64..20.0, gap in 0.01f64..5.0) {
            let s = SpectralProfile::new(&WalkKernel::lazy(1, 0.5).unwrap());
            prop_assert!(s.upsilon(a, UpsilonMethod::Series).unwrap() > s.upsilon(a + gap, UpsilonMethod::Series).unwrap());
        }

        #[test]
        fn round_trip(x in 0.05f64..5.0) {
            let s = simple1();
            let l = s.upsilon_inverse(x).unwrap();
            prop_assert!((s.upsilon(l, UpsilonMethod::Series).unwrap() - x).abs() < 1e-8);
            prop_assert!((l - simple_walk::upsilon_inverse(x)).abs() < 1e-9 * l);
        }

        #[test]
        fn upper_bound_monotone_in_lip(a in 0.05f64..3.0, b in 0.05f64..3.0) {
            let s = simple1();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let u1 = liapounov_bounds(&s, 2.0, &SigmaSpec::linear(lo)).unwrap().upper;
            let u2 = liapounov_bounds(&s, 2.0, &SigmaSpec::linear(hi)).unwrap().upper;
            prop_assert!(u2 >= u1);
        }
    }
}
