//! Forcing fields xi_n(x): bounded space-time or temporal noise.
//!
//! Draws are counter based. The value at (seed, replica, step n, site x) is the
//! first 64-bit word of ChaCha8 block `site_code(x)` on stream `n`, keyed by
//! `seed || replica || DOMAIN_TAG` (little endian). Temporal noise reads site 0.
//! `site_code` zigzag-encodes each coordinate into 21 bits at shifts 0, 21, 42.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, Site};

/// Tolerance on mean and variance of a model flagged white.
pub const WHITE_TOLERANCE: f64 = 1e-12;

/// Coordinates must satisfy |x_i| < 2^20 to be addressable by the counter scheme.
pub const MAX_COORDINATE: i64 = (1 << 20) - 1;

const DOMAIN_TAG: &[u8; 16] = b"stochheat-noise\0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// +/- scale with probability 1/2 each.
    Rademacher,
    /// Uniform on [-scale, scale].
    Uniform,
    /// Deterministic value `scale`.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Independent across steps and sites.
    Spacetime,
    /// One draw per step, shared by all sites.
    Temporal,
}

/// Noise description as it appears in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: FamilyKind,
    /// Rademacher amplitude, uniform half-width, or the constant value.
    pub scale: f64,
    pub mode: NoiseMode,
    /// Require mean 0 and variance 1.
    #[serde(default)]
    pub white: bool,
}

impl NoiseSpec {
    pub fn rademacher(scale: f64) -> NoiseSpec {
        NoiseSpec { family: FamilyKind::Rademacher, scale, mode: NoiseMode::Spacetime, white: false }
    }

    pub fn uniform(half_width: f64) -> NoiseSpec {
        NoiseSpec { family: FamilyKind::Uniform, scale: half_width, mode: NoiseMode::Spacetime, white: false }
    }

    pub fn constant(value: f64) -> NoiseSpec {
        NoiseSpec { family: FamilyKind::Constant, scale: value, mode: NoiseMode::Spacetime, white: false }
    }

    pub fn temporal(self) -> NoiseSpec {
        NoiseSpec { mode: NoiseMode::Temporal, ..self }
    }

    pub fn white(self) -> NoiseSpec {
        NoiseSpec { white: true, ..self }
    }
}

/// Analytic summary statistics of a noise law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseStats {
    pub mean: f64,
    pub variance: f64,
    /// C_xi = sup |xi|.
    pub bound: f64,
    /// K_{p,xi} = sup ||xi||_p.
    pub k_p: f64,
}

/// A validated noise law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    spec: NoiseSpec,
}

impl NoiseModel {
    pub fn new(spec: NoiseSpec) -> Result<NoiseModel> {
        if !spec.scale.is_finite() {
            return Err(Error::InvalidNoise(format!("scale {} is not finite", spec.scale)));
        }
        if spec.family != FamilyKind::Constant && spec.scale <= 0.0 {
            return Err(Error::InvalidNoise(format!("scale must be positive, got {}", spec.scale)));
        }
        let model = NoiseModel { spec };
        if spec.white {
            let (m, v) = (model.mean(), model.variance());
            if m.abs() > WHITE_TOLERANCE || (v - 1.0).abs() > WHITE_TOLERANCE {
                return Err(Error::InvalidNoise(format!("white noise needs mean 0 and variance 1, got mean {m} and variance {v}")));
            }
        }
        Ok(model)
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn mode(&self) -> NoiseMode {
        self.spec.mode
    }

    pub fn is_white(&self) -> bool {
        self.spec.white
    }

    pub fn mean(&self) -> f64 {
        match self.spec.family {
            FamilyKind::Constant => self.spec.scale,
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        let s = self.spec.scale;
        match self.spec.family {
            FamilyKind::Rademacher => s * s,
            FamilyKind::Uniform => s * s / 3.0,
            FamilyKind::Constant => 0.0,
        }
    }

    /// C_xi.
    pub fn bound(&self) -> f64 {
        self.spec.scale.abs()
    }

    /// (E|xi|^p)^{1/p}.
    pub fn k_p(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("moment order must be >= 1, got {p}")));
        }
        let s = self.spec.scale.abs();
        Ok(match self.spec.family {
            FamilyKind::Uniform => s * (1.0 / (p + 1.0)).powf(1.0 / p),
            _ => s,
        })
    }

    pub fn stats(&self, p: f64) -> Result<NoiseStats> {
        Ok(NoiseStats { mean: self.mean(), variance: self.variance(), bound: self.bound(), k_p: self.k_p(p)? })
    }

    /// ln E[(1+xi)^p] in closed form.
    pub fn log_moment_one_plus(&self, p: f64) -> f64 {
        let s = self.spec.scale;
        match self.spec.family {
            FamilyKind::Rademacher => (0.5 * ((1.0 + s).powf(p) + (1.0 - s).powf(p))).ln(),
            FamilyKind::Uniform => {
                if p == -1.0 {
                    return (((1.0 + s) / (1.0 - s)).ln() / (2.0 * s)).ln();
                }
                (((1.0 + s).powf(p + 1.0) - (1.0 - s).powf(p + 1.0)) / (2.0 * s * (p + 1.0))).ln()
            }
            FamilyKind::Constant => p * (1.0 + s).ln(),
        }
    }

    /// E ln(1+xi) in closed form.
    pub fn mean_log_one_plus(&self) -> f64 {
        let s = self.spec.scale;
        match self.spec.family {
            FamilyKind::Rademacher => 0.5 * (1.0 - s * s).ln(),
            FamilyKind::Uniform => ((1.0 + s) * (1.0 + s).ln() - (1.0 - s) * (1.0 - s).ln()) / (2.0 * s) - 1.0,
            FamilyKind::Constant => (1.0 + s).ln(),
        }
    }

    fn transform(&self, bits: u64) -> f64 {
        let s = self.spec.scale;
        match self.spec.family {
            FamilyKind::Rademacher => {
                if bits >> 63 == 0 {
                    s
                } else {
                    -s
                }
            }
            FamilyKind::Uniform => {
                // (2k+1 - 2^52) / 2^52 for a 52-bit k: exact, symmetric, never +/-1
                const TWO52: f64 = (1u64 << 52) as f64;
                let k = bits >> 12;
                s * (((2 * k + 1) as f64 - TWO52) / TWO52)
            }
            FamilyKind::Constant => s,
        }
    }

    /// xi_n(site) for the given stream.
    pub fn sample(&self, stream: &NoiseStream, n: u64, site: &Site) -> Result<f64> {
        Ok(match self.spec.family {
            FamilyKind::Constant => self.spec.scale,
            _ => {
                let code = match self.spec.mode {
                    NoiseMode::Spacetime => site_code(site)?,
                    NoiseMode::Temporal => 0,
                };
                let mut rng = stream.rng(n);
                self.transform(stream.word(&mut rng, code))
            }
        })
    }

    /// The slice xi_n restricted to `region`.
    pub fn sample_slice(&self, stream: &NoiseStream, n: u64, region: &BoxRegion) -> Result<NoiseSlice> {
        let values = if region.is_empty() {
            Vec::new()
        } else if self.spec.family == FamilyKind::Constant {
            vec![self.spec.scale; region.volume()]
        } else {
            match self.spec.mode {
                NoiseMode::Temporal => vec![self.sample(stream, n, &Site::ORIGIN)?; region.volume()],
                NoiseMode::Spacetime => {
                    for s in [region.lo(), region.hi()] {
                        site_code(&s)?;
                    }
                    let mut rng = stream.rng(n);
                    region.sites().map(|x| self.transform(stream.word(&mut rng, code_unchecked(&x)))).collect()
                }
            }
        };
        Ok(NoiseSlice { step: n, region: *region, values })
    }
}

/// Per-(seed, replica) key for counter-based sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: u64, replica: u64) -> NoiseStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&replica.to_le_bytes());
        key[16..].copy_from_slice(DOMAIN_TAG);
        NoiseStream { key }
    }

    fn rng(&self, n: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(n);
        rng
    }

    fn word(&self, rng: &mut ChaCha8Rng, code: u64) -> u64 {
        // one 16-word block per site
        rng.set_word_pos((code as u128) << 4);
        rng.next_u64()
    }
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn code_unchecked(site: &Site) -> u64 {
    zigzag(site.0[0]) | zigzag(site.0[1]) << 21 | zigzag(site.0[2]) << 42
}

fn site_code(site: &Site) -> Result<u64> {
    if site.max_norm() > MAX_COORDINATE as u64 {
        return Err(Error::Domain(format!("site {site} is outside the addressable range |x_i| <= {MAX_COORDINATE}")));
    }
    Ok(code_unchecked(site))
}

/// A realization of xi_n over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSlice {
    step: u64,
    region: BoxRegion,
    values: Vec<f64>,
}

impl NoiseSlice {
    /// Slice with explicit values (dense, row-major over `region`).
    pub fn from_values(step: u64, region: BoxRegion, values: Vec<f64>) -> Result<NoiseSlice> {
        if values.len() != region.volume() {
            return Err(Error::InvalidNoise(format!("{} values for a region of {} sites", values.len(), region.volume())));
        }
        Ok(NoiseSlice { step, region, values })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, site: &Site) -> Option<f64> {
        self.region.index_of(site).map(|i| self.values[i])
    }
}
