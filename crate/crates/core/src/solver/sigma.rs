//! Diffusion coefficients sigma and their structural constants.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants attached to sigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaConstants {
    /// Optimal Lipschitz constant.
    pub lip: f64,
    /// inf_z |sigma(z)/z|.
    pub l_sigma: f64,
    /// sigma(0).
    pub sigma0: f64,
    /// Linear growth constants: |sigma(z)| <= c_sigma |z| + c_tilde.
    pub c_sigma: f64,
    pub c_tilde: f64,
}

/// A caller-supplied sigma with declared constants.
#[derive(Clone)]
pub struct CustomSigma {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub constants: SigmaConstants,
}

impl fmt::Debug for CustomSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSigma").field("name", &self.name).field("constants", &self.constants).finish()
    }
}

/// The diffusion coefficient sigma.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    /// sigma(z) = nu z.
    Linear { nu: f64 },
    /// sigma(z) = nu z + c.
    Affine { nu: f64, c: f64 },
    /// Not expressible in configuration files.
    #[serde(skip)]
    Custom(CustomSigma),
}

impl PartialEq for SigmaSpec {
    fn eq(&self, other: &SigmaSpec) -> bool {
        match (self, other) {
            (SigmaSpec::Linear { nu: a }, SigmaSpec::Linear { nu: b }) => a == b,
            (SigmaSpec::Affine { nu: a, c: x }, SigmaSpec::Affine { nu: b, c: y }) => a == b && x == y,
            (SigmaSpec::Custom(a), SigmaSpec::Custom(b)) => Arc::ptr_eq(&a.f, &b.f) && a.constants == b.constants,
            _ => false,
        }
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Linear { nu } => write!(f, "linear({nu})"),
            SigmaSpec::Affine { nu, c } => write!(f, "affine({nu}, {c})"),
            SigmaSpec::Custom(c) => write!(f, "custom({})", c.name),
        }
    }
}

impl SigmaSpec {
    pub fn linear(nu: f64) -> SigmaSpec {
        SigmaSpec::Linear { nu }
    }

    pub fn affine(nu: f64, c: f64) -> SigmaSpec {
        SigmaSpec::Affine { nu, c }
    }

    /// Wraps a callable after spot-checking its declared constants.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        constants: SigmaConstants,
    ) -> Result<SigmaSpec> {
        let spec = SigmaSpec::Custom(CustomSigma { name: name.into(), f: Arc::new(f), constants });
        spec.validate()?;
        Ok(spec)
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            SigmaSpec::Linear { nu } => nu * z,
            SigmaSpec::Affine { nu, c } => nu * z + c,
            SigmaSpec::Custom(c) => (c.f)(z),
        }
    }

    pub fn constants(&self) -> SigmaConstants {
        match *self {
            SigmaSpec::Linear { nu } => {
                SigmaConstants { lip: nu.abs(), l_sigma: nu.abs(), sigma0: 0.0, c_sigma: nu.abs(), c_tilde: 0.0 }
            }
            SigmaSpec::Affine { nu, c } => SigmaConstants {
                lip: nu.abs(),
                // nu z + c vanishes at z = -c/nu, and |c/z| -> 0 when nu = 0
                l_sigma: if c == 0.0 { nu.abs() } else { 0.0 },
                sigma0: c,
                c_sigma: nu.abs(),
                c_tilde: c.abs(),
            },
            SigmaSpec::Custom(ref c) => c.constants,
        }
    }

    pub fn lip(&self) -> f64 {
        self.constants().lip
    }

    pub fn l_sigma(&self) -> f64 {
        self.constants().l_sigma
    }

    pub fn sigma0(&self) -> f64 {
        self.eval(0.0)
    }

    /// Linear sigma(z) = nu z, if that is what this is.
    pub fn linear_coefficient(&self) -> Option<f64> {
        match *self {
            SigmaSpec::Linear { nu } => Some(nu),
            SigmaSpec::Affine { nu, c } if c == 0.0 => Some(nu),
            _ => None,
        }
    }

    /// Checks parameters, and for custom sigma the declared constants on a test grid.
    pub fn validate(&self) -> Result<()> {
        let k = self.constants();
        for (name, v) in [("Lip", k.lip), ("L_sigma", k.l_sigma), ("C_sigma", k.c_sigma), ("C~_sigma", k.c_tilde)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSigma(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !k.sigma0.is_finite() {
            return Err(Error::InvalidSigma("sigma(0) is not finite".into()));
        }
        if let SigmaSpec::Custom(c) = self {
            spot_check(c)?;
        }
        Ok(())
    }
}

const CHECK_SLACK: f64 = 1e-9;

fn spot_check(c: &CustomSigma) -> Result<()> {
    let k = c.constants;
    let f = &c.f;
    let mut grid: Vec<f64> = (-2000..=2000).map(|i| i as f64 * 0.005).collect();
    for e in -6..=6 {
        let m = 10f64.powi(e);
        grid.extend([m, -m, 3.7 * m, -3.7 * m]);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let vals: Vec<f64> = grid.iter().map(|z| f(*z)).collect();
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidSigma(format!("sigma({}) is not finite", grid[i])));
    }
    let s0 = f(0.0);
    if (s0 - k.sigma0).abs() > CHECK_SLACK * (1.0 + s0.abs()) {
        return Err(Error::InvalidSigma(format!("declared sigma(0) = {} but sigma(0) = {s0}", k.sigma0)));
    }
    let tol = |scale: f64| CHECK_SLACK * (1.0 + scale);
    for (z, v) in grid.iter().zip(&vals) {
        if v.abs() < k.l_sigma * z.abs() - tol(z.abs()) {
            return Err(Error::InvalidSigma(format!("|sigma({z})| = {} is below L_sigma |z|", v.abs())));
        }
        if v.abs() > k.c_sigma * z.abs() + k.c_tilde + tol(z.abs()) {
            return Err(Error::InvalidSigma(format!("|sigma({z})| = {} exceeds C_sigma |z| + C~_sigma", v.abs())));
        }
    }
    // Lipschitz check on neighbours and on a stride of far pairs
    let n = grid.len();
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    pairs.extend((0..n).step_by(97).flat_map(|i| (0..n).step_by(89).map(move |j| (i, j))));
    for (i, j) in pairs {
        let d = (grid[i] - grid[j]).abs();
        if (vals[i] - vals[j]).abs() > k.lip * d + tol(vals[i].abs().max(vals[j].abs())) {
            return Err(Error::InvalidSigma(format!(
                "Lipschitz constant {} violated between {} and {}",
                k.lip, grid[i], grid[j]
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clipped() -> SigmaSpec {
        SigmaSpec::custom(
            "clipped",
            |z: f64| if z.abs() <= 1.0 { z } else { z.signum() * (0.5 * z.abs() + 0.5) },
            SigmaConstants { lip: 1.0, l_sigma: 0.5, sigma0: 0.0, c_sigma: 1.0, c_tilde: 0.0 },
        )
        .unwrap()
    }

    #[test]
    fn linear_constants() {
        let k = SigmaSpec::linear(0.7).constants();
        assert_eq!((k.lip, k.l_sigma, k.c_sigma, k.sigma0, k.c_tilde), (0.7, 0.7, 0.7, 0.0, 0.0));
    }

    #[test]
    fn affine_constants() {
        let k = SigmaSpec::affine(-2.0, 0.5).constants();
        assert_eq!((k.lip, k.l_sigma, k.c_sigma, k.sigma0, k.c_tilde), (2.0, 0.0, 2.0, 0.5, 0.5));
        assert_eq!(SigmaSpec::affine(1.0, 0.0).l_sigma(), 1.0);
    }

    #[test]
    fn custom_with_true_constants_accepted() {
        let s = clipped();
        assert_eq!(s.eval(3.0), 2.0);
        assert_eq!(s.lip(), 1.0);
    }

    #[test]
    fn custom_with_wrong_constants_rejected() {
        let f = |z: f64| 2.0 * z;
        let ok = SigmaConstants { lip: 2.0, l_sigma: 2.0, sigma0: 0.0, c_sigma: 2.0, c_tilde: 0.0 };
        assert!(SigmaSpec::custom("double", f, ok).is_ok());
        assert!(SigmaSpec::custom("double", f, SigmaConstants { lip: 1.5, ..ok }).is_err());
        assert!(SigmaSpec::custom("double", f, SigmaConstants { l_sigma: 2.5, ..ok }).is_err());
        assert!(SigmaSpec::custom("double", f, SigmaConstants { sigma0: 1.0, ..ok }).is_err());
        assert!(SigmaSpec::custom("double", f, SigmaConstants { c_sigma: 1.0, ..ok }).is_err());
        assert!(SigmaSpec::custom("nan", |_| f64::NAN, ok).is_err());
    }

    #[test]
    fn config_round_trip() {
        let s: SigmaSpec = serde_json::from_str(r#"{"kind":"affine","nu":0.5,"c":1.0}"#).unwrap();
        assert_eq!(s, SigmaSpec::affine(0.5, 1.0));
        assert_eq!(serde_json::to_string(&SigmaSpec::linear(1.0)).unwrap(), r#"{"kind":"linear","nu":1.0}"#);
    }
}
