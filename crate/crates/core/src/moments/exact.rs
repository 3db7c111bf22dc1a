//! Exact second moments for sigma(z) = nu z under white noise:
//! m_{n+1}(x) = ((P^{n+1} u_0)(x))^2 + nu^2 sum_{j=0}^{n} sum_y (P^{n-j}_{x,y})^2 m_j(y).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::WalkKernel;
use crate::lattice::{correlate, LatticeField, Site};

/// m_0, ..., m_{n_max}.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondMoments {
    pub nu: f64,
    pub fields: Vec<LatticeField>,
}

/// One row of the sup series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupRow {
    pub n: usize,
    pub sup: f64,
    pub total: f64,
}

impl SecondMoments {
    pub fn n_max(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn at(&self, n: usize, x: &Site) -> f64 {
        self.fields[n].get(x)
    }

    /// sup_x m_n(x) for every n.
    pub fn sup_series(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f.max_value()).collect()
    }

    pub fn rows(&self) -> Vec<SupRow> {
        self.fields.iter().enumerate().map(|(n, f)| SupRow { n, sup: f.max_value(), total: f.sum() }).collect()
    }
}

pub fn exact_second_moment(kernel: &WalkKernel, u0: &LatticeField, nu: f64, n_max: usize) -> Result<SecondMoments> {
    if u0.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), got: u0.dim() });
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("nu must be finite and nonnegative, got {nu}")));
    }
    let powers = kernel.powers(n_max);
    let squared: Vec<(Vec<(Site, f64)>, u64)> =
        powers.iter().map(|k| (k.weights().iter().map(|(z, p)| (*z, p * p)).collect(), k.radius())).collect();
    let nu2 = nu * nu;
    let mut fields = Vec::with_capacity(n_max + 1);
    fields.push(u0.map(|v| v * v));
    for n in 0..n_max {
        let target = u0.bounds().dilate((n as u64 + 1) * kernel.radius());
        let mut acc: Vec<f64> = powers[n + 1].apply_on(u0, &target).into_iter().map(|v| v * v).collect();
        if nu2 != 0.0 {
            for (j, m) in fields.iter().enumerate() {
                let (w, r) = &squared[n - j];
                for (a, t) in acc.iter_mut().zip(correlate(m, w, *r, &target)) {
                    *a += nu2 * t;
                }
            }
        }
        fields.push(LatticeField::from_dense(target, acc));
    }
    Ok(SecondMoments { nu, fields })
}
