//! Lattice sites, boxes, and finitely supported fields on Z^d.
//!
//! A [`LatticeField`] is semantically a finite map from sites to nonzero reals.
//! It is stored densely over the tight bounding box of its nonzero entries,
//! which keeps the stencil loops of the solver cache friendly while preserving
//! the "exact zeros are absent" semantics: zeros inside the box are implicit
//! and never reported by [`LatticeField::iter`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 3;

/// A point of Z^d, d <= 3. Coordinates beyond the dimension in use are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub [i64; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    /// Builds a site from a coordinate slice of length at most [`MAX_DIM`].
    pub fn new(coords: &[i64]) -> Site {
        assert!(coords.len() <= MAX_DIM, "at most {MAX_DIM} coordinates");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    pub fn coords(&self, dim: usize) -> &[i64] {
        &self.0[..dim]
    }

    /// Max-norm |x| = max_i |x_i|.
    pub fn max_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn add(self, other: Site) -> Site {
        Site([self.0[0] + other.0[0], self.0[1] + other.0[1], self.0[2] + other.0[2]])
    }

    pub fn sub(self, other: Site) -> Site {
        Site([self.0[0] - other.0[0], self.0[1] - other.0[1], self.0[2] - other.0[2]])
    }

    pub fn neg(self) -> Site {
        Site([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.0[0], self.0[1], self.0[2])
    }
}

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Domain(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
    }
    Ok(())
}

/// An axis-aligned box of sites, bounds inclusive.
///
/// Axes at or beyond `dim` are pinned to the single coordinate 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    dim: usize,
    lo: [i64; MAX_DIM],
    hi: [i64; MAX_DIM],
}

impl BoxRegion {
    pub fn new(dim: usize, lo: &[i64], hi: &[i64]) -> Result<BoxRegion> {
        check_dim(dim)?;
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: lo.len().max(hi.len()) });
        }
        let mut b = BoxRegion { dim, lo: [0; MAX_DIM], hi: [0; MAX_DIM] };
        b.lo[..dim].copy_from_slice(lo);
        b.hi[..dim].copy_from_slice(hi);
        Ok(b.normalized())
    }

    /// The max-norm ball {x : |x| <= radius}.
    pub fn centered(dim: usize, radius: u64) -> BoxRegion {
        assert!((1..=MAX_DIM).contains(&dim));
        let r = radius as i64;
        let mut b = BoxRegion { dim, lo: [0; MAX_DIM], hi: [0; MAX_DIM] };
        for i in 0..dim {
            b.lo[i] = -r;
            b.hi[i] = r;
        }
        b
    }

    pub fn single(dim: usize, site: Site) -> BoxRegion {
        let mut b = BoxRegion { dim, lo: [0; MAX_DIM], hi: [0; MAX_DIM] };
        for i in 0..dim {
            b.lo[i] = site.0[i];
            b.hi[i] = site.0[i];
        }
        b
    }

    pub fn empty(dim: usize) -> BoxRegion {
        let mut b = BoxRegion { dim, lo: [0; MAX_DIM], hi: [0; MAX_DIM] };
        b.lo[0] = 1;
        b
    }

    fn normalized(self) -> BoxRegion {
        if (0..self.dim).any(|i| self.lo[i] > self.hi[i]) {
            BoxRegion::empty(self.dim)
        } else {
            self
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> Site {
        Site(self.lo)
    }

    pub fn hi(&self) -> Site {
        Site(self.hi)
    }

    pub fn is_empty(&self) -> bool {
        self.lo[0] > self.hi[0]
    }

    /// Extent along each of the three storage axes; pinned axes have extent 1.
    pub fn shape(&self) -> [usize; MAX_DIM] {
        if self.is_empty() {
            return [0; MAX_DIM];
        }
        let mut s = [1; MAX_DIM];
        for i in 0..self.dim {
            s[i] = (self.hi[i] - self.lo[i] + 1) as usize;
        }
        s
    }

    pub fn volume(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn contains(&self, site: &Site) -> bool {
        !self.is_empty()
            && (0..MAX_DIM).all(|i| {
                if i < self.dim {
                    self.lo[i] <= site.0[i] && site.0[i] <= self.hi[i]
                } else {
                    site.0[i] == 0
                }
            })
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        other.is_empty()
            || (!self.is_empty()
                && (0..self.dim).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i]))
    }

    pub fn dilate(&self, r: u64) -> BoxRegion {
        if self.is_empty() {
            return *self;
        }
        let r = r as i64;
        let mut b = *self;
        for i in 0..self.dim {
            b.lo[i] -= r;
            b.hi[i] += r;
        }
        b
    }

    /// Removes a layer of thickness `r`; the result may be empty.
    pub fn shrink(&self, r: u64) -> BoxRegion {
        if self.is_empty() {
            return *self;
        }
        let r = r as i64;
        let mut b = *self;
        for i in 0..self.dim {
            b.lo[i] += r;
            b.hi[i] -= r;
        }
        b.normalized()
    }

    pub fn intersect(&self, other: &BoxRegion) -> BoxRegion {
        if self.is_empty() || other.is_empty() {
            return BoxRegion::empty(self.dim);
        }
        let mut b = *self;
        for i in 0..self.dim {
            b.lo[i] = self.lo[i].max(other.lo[i]);
            b.hi[i] = self.hi[i].min(other.hi[i]);
        }
        b.normalized()
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &BoxRegion) -> BoxRegion {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let mut b = *self;
        for i in 0..self.dim {
            b.lo[i] = self.lo[i].min(other.lo[i]);
            b.hi[i] = self.hi[i].max(other.hi[i]);
        }
        b
    }

    /// Row-major strides of the storage axes (axis 2 fastest).
    pub(crate) fn strides(&self) -> [usize; MAX_DIM] {
        let s = self.shape();
        [s[1] * s[2], s[2], 1]
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let st = self.strides();
        Some((0..MAX_DIM).map(|i| (site.0[i] - self.lo[i]) as usize * st[i]).sum())
    }

    pub fn site_at(&self, mut index: usize) -> Site {
        let st = self.strides();
        let mut c = [0; MAX_DIM];
        for i in 0..MAX_DIM {
            c[i] = self.lo[i] + (index / st[i]) as i64;
            index %= st[i];
        }
        Site(c)
    }

    /// Sites in storage (lexicographic) order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume()).map(move |i| self.site_at(i))
    }

    /// Largest max-norm of any site in the box, `None` when empty.
    pub fn max_norm_radius(&self) -> Option<u64> {
        if self.is_empty() {
            return None;
        }
        (0..self.dim).map(|i| self.lo[i].unsigned_abs().max(self.hi[i].unsigned_abs())).max()
    }
}

/// Copies the overlap of two dense boxes from `src` into `dst`.
pub(crate) fn copy_overlap(src: &BoxRegion, src_data: &[f64], dst: &BoxRegion, dst_data: &mut [f64]) {
    let ov = src.intersect(dst);
    if ov.is_empty() {
        return;
    }
    let (ss, ds) = (src.strides(), dst.strides());
    if src.shape()[1] * src.shape()[2] == 1 && dst.shape()[1] * dst.shape()[2] == 1 {
        // single column: contiguous along the first axis
        let (so, d0, len) = ((ov.lo[0] - src.lo[0]) as usize, (ov.lo[0] - dst.lo[0]) as usize, ov.shape()[0]);
        dst_data[d0..d0 + len].copy_from_slice(&src_data[so..so + len]);
        return;
    }
    let len = ov.shape()[2];
    for a in ov.lo[0]..=ov.hi[0] {
        for b in ov.lo[1]..=ov.hi[1] {
            let so = (a - src.lo[0]) as usize * ss[0] + (b - src.lo[1]) as usize * ss[1] + (ov.lo[2] - src.lo[2]) as usize;
            let d0 = (a - dst.lo[0]) as usize * ds[0] + (b - dst.lo[1]) as usize * ds[1] + (ov.lo[2] - dst.lo[2]) as usize;
            dst_data[d0..d0 + len].copy_from_slice(&src_data[so..so + len]);
        }
    }
}

/// A finitely supported real function on Z^d.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    dim: usize,
    bounds: BoxRegion,
    data: Vec<f64>,
    radius: Option<u64>,
    sup: f64,
}

impl LatticeField {
    pub fn zero(dim: usize) -> LatticeField {
        LatticeField { dim, bounds: BoxRegion::empty(dim), data: Vec::new(), radius: None, sup: 0.0 }
    }

    pub fn delta(dim: usize, site: Site, mass: f64) -> LatticeField {
        LatticeField::from_dense(BoxRegion::single(dim, site), vec![mass])
    }

    /// `value` on every site of `region`.
    pub fn constant_on(region: BoxRegion, value: f64) -> LatticeField {
        LatticeField::from_dense(region, vec![value; region.volume()])
    }

    /// Builds a field from (site, value) pairs. Duplicate sites are rejected.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (Site, f64)>) -> Result<LatticeField> {
        check_dim(dim)?;
        let entries: Vec<(Site, f64)> = entries.into_iter().collect();
        let mut region = BoxRegion::empty(dim);
        for (s, v) in &entries {
            if (dim..MAX_DIM).any(|i| s.0[i] != 0) {
                return Err(Error::InvalidField(format!("site {s} has coordinates beyond dimension {dim}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidField(format!("non-finite value {v} at {s}")));
            }
            region = region.hull(&BoxRegion::single(dim, *s));
        }
        let mut data = vec![0.0; region.volume()];
        let mut seen = vec![false; region.volume()];
        for (s, v) in entries {
            let i = region.index_of(&s).expect("site inside hull");
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidField(format!("duplicate site {s}")));
            }
            data[i] = v;
        }
        Ok(LatticeField::from_dense(region, data))
    }

    /// Wraps dense values over `region`, trimming to the nonzero bounding box.
    pub fn from_dense(region: BoxRegion, data: Vec<f64>) -> LatticeField {
        assert_eq!(region.volume(), data.len(), "dense buffer does not match region");
        let dim = region.dim();
        if region.is_empty() {
            return LatticeField::zero(dim);
        }
        let shape = region.shape();
        let st = region.strides();
        let mut lo = [usize::MAX; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut sup = 0.0f64;
        let mut any = false;
        for a in 0..shape[0] {
            for b in 0..shape[1] {
                let row = &data[a * st[0] + b * st[1]..][..shape[2]];
                let Some(first) = row.iter().position(|v| *v != 0.0) else { continue };
                let last = row.iter().rposition(|v| *v != 0.0).unwrap_or(first);
                any = true;
                for (k, i) in [a, b].into_iter().enumerate() {
                    lo[k] = lo[k].min(i);
                    hi[k] = hi[k].max(i);
                }
                lo[2] = lo[2].min(first);
                hi[2] = hi[2].max(last);
                sup = row[first..=last].iter().fold(sup, |s, v| s.max(v.abs()));
            }
        }
        if !any {
            return LatticeField::zero(dim);
        }
        let mut tight = region;
        for a in 0..dim {
            tight.lo[a] = region.lo[a] + lo[a] as i64;
            tight.hi[a] = region.lo[a] + hi[a] as i64;
        }
        let data = if tight == region {
            data
        } else {
            let mut out = vec![0.0; tight.volume()];
            copy_overlap(&region, &data, &tight, &mut out);
            out
        };
        LatticeField { dim, bounds: tight, radius: tight.max_norm_radius(), data, sup }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bounding box of the nonzero entries (empty for the zero field).
    pub fn bounds(&self) -> &BoxRegion {
        &self.bounds
    }

    /// Dense values over [`Self::bounds`], zeros included.
    pub fn dense(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, site: &Site) -> f64 {
        self.bounds.index_of(site).map_or(0.0, |i| self.data[i])
    }

    /// Nonzero entries in lexicographic site order.
    pub fn iter(&self) -> impl Iterator<Item = (Site, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(i, v)| (self.bounds.site_at(i), *v))
    }

    pub fn is_zero(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Number of nonzero entries.
    pub fn support_size(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Max-norm of the farthest nonzero entry; `None` for the zero field.
    pub fn support_radius(&self) -> Option<u64> {
        self.radius
    }

    /// sup_x |f(x)|.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    /// sup over all of Z^d of f(x), signed. Sites off the support count as 0.
    pub fn max_value(&self) -> f64 {
        self.iter().map(|(_, v)| v).fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Dense copy of the values over an arbitrary region (zeros outside the support).
    pub fn values_on(&self, region: &BoxRegion) -> Vec<f64> {
        let mut out = vec![0.0; region.volume()];
        if !self.is_zero() {
            copy_overlap(&self.bounds, &self.data, region, &mut out);
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatticeField {
        LatticeField::from_dense(self.bounds, self.data.iter().map(|v| f(*v)).collect())
    }

    /// Pointwise `self + scale * other`.
    pub fn add_scaled(&self, other: &LatticeField, scale: f64) -> LatticeField {
        let region = self.bounds.hull(&other.bounds);
        let mut a = self.values_on(&region);
        let b = other.values_on(&region);
        for (x, y) in a.iter_mut().zip(&b) {
            *x += scale * y;
        }
        LatticeField::from_dense(region, a)
    }

    /// The field restricted to `region` (entries outside dropped).
    pub fn restrict(&self, region: &BoxRegion) -> LatticeField {
        let r = self.bounds.intersect(region);
        LatticeField::from_dense(r, self.values_on(&r))
    }

    /// max_x |self(x) - other(x)|.
    pub fn max_abs_diff(&self, other: &LatticeField) -> f64 {
        let region = self.bounds.hull(&other.bounds);
        let a = self.values_on(&region);
        let b = other.values_on(&region);
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// out(x) = sum_k w_k * src(x + z_k) for every x in `out`, with `src` zero off its support.
///
/// Weights are summed in slice order, so equal inputs give bitwise equal outputs.
pub(crate) fn correlate(src: &LatticeField, weights: &[(Site, f64)], wradius: u64, out: &BoxRegion) -> Vec<f64> {
    let mut result = vec![0.0; out.volume()];
    if out.is_empty() || src.is_zero() || weights.is_empty() {
        return result;
    }
    let pad = out.dilate(wradius);
    let mut buf = vec![0.0; pad.volume()];
    copy_overlap(src.bounds(), src.dense(), &pad, &mut buf);
    let ps = pad.strides();
    let offsets: Vec<(isize, f64)> = weights
        .iter()
        .map(|(z, w)| ((z.0[0] as isize) * ps[0] as isize + (z.0[1] as isize) * ps[1] as isize + z.0[2] as isize, *w))
        .collect();
    let dim = out.dim();
    let r = wradius as usize;
    let margin = [r, if dim > 1 { r } else { 0 }, if dim > 2 { r } else { 0 }];
    let os = out.shape();
    let mut k = 0;
    for a in 0..os[0] {
        for b in 0..os[1] {
            let row = (a + margin[0]) * ps[0] + (b + margin[1]) * ps[1] + margin[2];
            for c in 0..os[2] {
                let base = (row + c) as isize;
                let mut acc = 0.0;
                for &(off, w) in &offsets {
                    acc += w * buf[(base + off) as usize];
                }
                result[k] = acc;
                k += 1;
            }
        }
    }
    result
}
