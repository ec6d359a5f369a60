//! Discretized cylinder spacetime `R_t x S^1_x` with a diagonal Lorentzian metric.
//!
//! Sites are indexed row-major: `site = it * n_x + ix`. The metric is
//! time-independent, so it is stored per spatial index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SitePoint {
    pub it: usize,
    pub ix: usize,
}

impl SitePoint {
    pub fn new(it: usize, ix: usize) -> Self {
        SitePoint { it, ix }
    }
}

/// Boolean mask over all lattice sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteSet {
    n_x: usize,
    mask: Vec<bool>,
}

impl SiteSet {
    pub fn empty(lat: &LorentzianLattice) -> Self {
        SiteSet {
            n_x: lat.n_x,
            mask: vec![false; lat.n_sites()],
        }
    }

    pub fn full(lat: &LorentzianLattice) -> Self {
        SiteSet {
            n_x: lat.n_x,
            mask: vec![true; lat.n_sites()],
        }
    }

    pub fn from_points(lat: &LorentzianLattice, pts: &[SitePoint]) -> Self {
        let mut s = Self::empty(lat);
        for p in pts {
            s.insert(*p);
        }
        s
    }

    pub fn from_mask(lat: &LorentzianLattice, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), lat.n_sites());
        SiteSet { n_x: lat.n_x, mask }
    }

    pub fn insert(&mut self, p: SitePoint) {
        self.mask[p.it * self.n_x + p.ix] = true;
    }

    pub fn contains(&self, p: SitePoint) -> bool {
        self.mask[p.it * self.n_x + p.ix]
    }

    pub fn contains_index(&self, s: usize) -> bool {
        self.mask[s]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn points(&self) -> Vec<SitePoint> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(s, _)| SitePoint::new(s / self.n_x, s % self.n_x))
            .collect()
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        SiteSet {
            n_x: self.n_x,
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        SiteSet {
            n_x: self.n_x,
            mask: self
                .mask
                .iter()
                .zip(&other.mask)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn complement(&self) -> SiteSet {
        SiteSet {
            n_x: self.n_x,
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn intersects(&self, other: &SiteSet) -> bool {
        self.mask.iter().zip(&other.mask).any(|(a, b)| *a && *b)
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b)
    }

    /// Grow by `r` sites in every direction (Chebyshev distance, periodic in x, clipped in t).
    pub fn dilate(&self, r: usize) -> SiteSet {
        let n_t = self.mask.len() / self.n_x;
        let n_x = self.n_x;
        let mut out = vec![false; self.mask.len()];
        let r = r as isize;
        for s in 0..self.mask.len() {
            if !self.mask[s] {
                continue;
            }
            let (it, ix) = ((s / n_x) as isize, (s % n_x) as isize);
            for dt in -r..=r {
                let jt = it + dt;
                if jt < 0 || jt >= n_t as isize {
                    continue;
                }
                for dx in -r..=r {
                    let jx = (ix + dx).rem_euclid(n_x as isize);
                    out[jt as usize * n_x + jx as usize] = true;
                }
            }
        }
        SiteSet { n_x, mask: out }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianLattice {
    pub n_t: usize,
    pub n_x: usize,
    pub dt: f64,
    pub dx: f64,
    /// `g_tt` per spatial index (negative).
    pub g_tt: Vec<f64>,
    /// `g_xx` per spatial index (positive).
    pub g_xx: Vec<f64>,
    vol: Vec<f64>,
}

impl LorentzianLattice {
    pub fn minkowski(n_t: usize, n_x: usize, dt: f64, dx: f64) -> Result<Self> {
        Self::with_metric(n_t, n_x, dt, dx, vec![-1.0; n_x], vec![1.0; n_x])
    }

    pub fn with_metric(
        n_t: usize,
        n_x: usize,
        dt: f64,
        dx: f64,
        g_tt: Vec<f64>,
        g_xx: Vec<f64>,
    ) -> Result<Self> {
        if n_t < 2 {
            return Err(Error::InvalidLattice("n_t must be at least 2".into()));
        }
        if n_x < 3 {
            return Err(Error::InvalidLattice("n_x must be at least 3".into()));
        }
        if !(dt > 0.0 && dt.is_finite() && dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidLattice("dt and dx must be positive".into()));
        }
        if g_tt.len() != n_x || g_xx.len() != n_x {
            return Err(Error::InvalidLattice(
                "metric table length must equal n_x".into(),
            ));
        }
        if g_tt.iter().any(|&g| !(g < 0.0)) || g_xx.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidLattice(
                "metric must have signature (-,+)".into(),
            ));
        }
        let vol = (0..n_x)
            .map(|ix| (-g_tt[ix] * g_xx[ix]).sqrt() * dt * dx)
            .collect();
        Ok(LorentzianLattice {
            n_t,
            n_x,
            dt,
            dx,
            g_tt,
            g_xx,
            vol,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_t * self.n_x
    }

    pub fn site(&self, p: SitePoint) -> usize {
        p.it * self.n_x + p.ix
    }

    pub fn point(&self, s: usize) -> SitePoint {
        SitePoint::new(s / self.n_x, s % self.n_x)
    }

    pub fn wrap_x(&self, ix: isize) -> usize {
        ix.rem_euclid(self.n_x as isize) as usize
    }

    pub fn vol_weight(&self, s: usize) -> f64 {
        self.vol[s % self.n_x]
    }

    pub fn vol_weights(&self) -> Vec<f64> {
        (0..self.n_sites()).map(|s| self.vol_weight(s)).collect()
    }

    /// Inverse metric components `(g^tt, g^xx)` at a site.
    pub fn inv_metric(&self, s: usize) -> (f64, f64) {
        let ix = s % self.n_x;
        (1.0 / self.g_tt[ix], 1.0 / self.g_xx[ix])
    }

    /// Coordinate light speed `sqrt(-g_tt/g_xx)` at spatial index `ix`.
    pub fn light_speed(&self, ix: usize) -> f64 {
        (-self.g_tt[ix] / self.g_xx[ix]).sqrt()
    }

    /// Sites the causal cone widens by per time step from spatial index `ix`.
    pub fn cone_width(&self, ix: usize) -> usize {
        let w = self.light_speed(ix) * self.dt / self.dx;
        ((w - 1e-12).ceil() as usize).max(1)
    }

    /// `dt/dx <= min sqrt(g_xx/-g_tt)`.
    pub fn satisfies_cfl(&self) -> bool {
        let ratio = self.dt / self.dx;
        (0..self.n_x).all(|ix| ratio <= 1.0 / self.light_speed(ix) * (1.0 + 1e-12))
    }

    pub fn cylinder_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.n_x - d)
    }

    /// Chebyshev distance between two sites, periodic in `x`.
    pub fn site_distance(&self, a: usize, b: usize) -> usize {
        let (pa, pb) = (self.point(a), self.point(b));
        pa.it
            .abs_diff(pb.it)
            .max(self.cylinder_distance(pa.ix, pb.ix))
    }

    /// Lattice `J+` of a set of sites by per-step cone growth.
    pub fn future_of(&self, set: &SiteSet) -> SiteSet {
        let mut mask = set.mask().to_vec();
        for it in 0..self.n_t - 1 {
            for ix in 0..self.n_x {
                if !mask[it * self.n_x + ix] {
                    continue;
                }
                let w = self.cone_width(ix) as isize;
                for d in -w..=w {
                    let jx = self.wrap_x(ix as isize + d);
                    mask[(it + 1) * self.n_x + jx] = true;
                }
            }
        }
        SiteSet::from_mask(self, mask)
    }

    /// Lattice `J-`: `p` is in `J-(q)` iff `q` is in `J+(p)`.
    pub fn past_of(&self, set: &SiteSet) -> SiteSet {
        let mut mask = set.mask().to_vec();
        for it in (1..self.n_t).rev() {
            for ix in 0..self.n_x {
                if mask[(it - 1) * self.n_x + ix] {
                    continue;
                }
                let w = self.cone_width(ix) as isize;
                let reached = (-w..=w).any(|d| mask[it * self.n_x + self.wrap_x(ix as isize + d)]);
                if reached {
                    mask[(it - 1) * self.n_x + ix] = true;
                }
            }
        }
        SiteSet::from_mask(self, mask)
    }

    pub fn causal_future(&self, p: SitePoint) -> SiteSet {
        self.future_of(&SiteSet::from_points(self, &[p]))
    }

    pub fn causal_past(&self, p: SitePoint) -> SiteSet {
        self.past_of(&SiteSet::from_points(self, &[p]))
    }

    /// `J+(A) U J-(A)`.
    pub fn causal_hull(&self, set: &SiteSet) -> SiteSet {
        self.future_of(set).union(&self.past_of(set))
    }

    pub fn causally_disjoint(&self, a: &SiteSet, b: &SiteSet) -> Result<bool> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(!self.causal_hull(a).intersects(b))
    }

    /// `sum_p density[p] * vol_weight[p]`.
    pub fn integrate(&self, density: &[f64]) -> f64 {
        assert_eq!(density.len(), self.n_sites());
        density
            .iter()
            .enumerate()
            .map(|(s, d)| d * self.vol_weight(s))
            .sum()
    }

    pub fn same_shape(&self, other: &LorentzianLattice) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cone() {
        let lat = LorentzianLattice::minkowski(8, 16, 1.0, 1.0).unwrap();
        let j = lat.causal_future(SitePoint::new(0, 0));
        let row2: Vec<_> = j.points().into_iter().filter(|p| p.it == 2).collect();
        assert_eq!(row2.len(), 5);
        let row0: Vec<_> = j.points().into_iter().filter(|p| p.it == 0).collect();
        assert_eq!(row0, vec![SitePoint::new(0, 0)]);
    }

    #[test]
    fn cone_wraps() {
        let lat = LorentzianLattice::minkowski(6, 8, 1.0, 1.0).unwrap();
        let j = lat.causal_future(SitePoint::new(0, 0));
        assert_eq!(j.points().into_iter().filter(|p| p.it == 4).count(), 8);
    }

    #[test]
    fn disjointness_examples() {
        let lat = LorentzianLattice::minkowski(8, 16, 1.0, 1.0).unwrap();
        let s = |it, ix| SiteSet::from_points(&lat, &[SitePoint::new(it, ix)]);
        assert!(lat.causally_disjoint(&s(5, 0), &s(5, 4)).unwrap());
        assert!(!lat.causally_disjoint(&s(0, 0), &s(3, 1)).unwrap());
        assert!(lat.causally_disjoint(&s(0, 0), &s(2, 7)).unwrap());
        assert_eq!(
            lat.causally_disjoint(&SiteSet::empty(&lat), &s(0, 0)),
            Err(Error::EmptySupport)
        );
    }

    #[test]
    fn half_courant_width_is_one() {
        let lat = LorentzianLattice::minkowski(4, 8, 0.05, 0.1).unwrap();
        assert_eq!(lat.cone_width(0), 1);
        assert!(lat.satisfies_cfl());
        let bad = LorentzianLattice::minkowski(4, 8, 0.2, 0.1).unwrap();
        assert!(!bad.satisfies_cfl());
    }
}
