//! Sections of `M x N`, compactly supported variations, exponential charts and gluing.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{TargetGeometry, DEFAULT_GEODESIC_STEPS};
use crate::lattice::{LorentzianLattice, SiteSet};

const CHART_TOL: f64 = 1e-13;

/// A section: one target-chart point per site, stored `[site][component]`.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub lattice: Arc<LorentzianLattice>,
    pub target: Arc<TargetGeometry>,
    pub values: Vec<f64>,
}

/// A tangent vector field along a section, stored `[site][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variation {
    pub n_x: usize,
    pub n: usize,
    pub components: Vec<f64>,
}

impl FieldConfig {
    pub fn new(
        lattice: Arc<LorentzianLattice>,
        target: Arc<TargetGeometry>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = target.dim();
        let expected = lattice.n_sites() * n;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        for s in 0..lattice.n_sites() {
            if !target.in_domain(&values[s * n..(s + 1) * n]) {
                return Err(Error::ChartOverflowAt(lattice.point(s)));
            }
        }
        Ok(FieldConfig {
            lattice,
            target,
            values,
        })
    }

    pub fn constant(
        lattice: Arc<LorentzianLattice>,
        target: Arc<TargetGeometry>,
        y: &[f64],
    ) -> Result<Self> {
        let values = (0..lattice.n_sites())
            .flat_map(|_| y.iter().copied())
            .collect();
        Self::new(lattice, target, values)
    }

    /// Build from a function of physical coordinates `(t, x)`.
    pub fn from_fn(
        lattice: Arc<LorentzianLattice>,
        target: Arc<TargetGeometry>,
        f: impl Fn(f64, f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(lattice.n_sites() * target.dim());
        for s in 0..lattice.n_sites() {
            let p = lattice.point(s);
            let y = f(p.it as f64 * lattice.dt, p.ix as f64 * lattice.dx);
            if y.len() != target.dim() {
                return Err(Error::DimensionMismatch {
                    expected: target.dim(),
                    got: y.len(),
                });
            }
            values.extend(y);
        }
        Self::new(lattice, target, values)
    }

    pub fn n(&self) -> usize {
        self.target.dim()
    }

    pub fn value(&self, s: usize) -> &[f64] {
        let n = self.n();
        &self.values[s * n..(s + 1) * n]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.lattice.clone(), self.target.clone(), values)
    }

    pub fn compatible(&self, other: &FieldConfig) -> bool {
        self.lattice.same_shape(&other.lattice) && self.target == other.target
    }

    pub fn zero_variation(&self) -> Variation {
        Variation::zeros(&self.lattice, self.n())
    }
}

impl Variation {
    pub fn zeros(lat: &LorentzianLattice, n: usize) -> Self {
        Variation {
            n_x: lat.n_x,
            n,
            components: vec![0.0; lat.n_sites() * n],
        }
    }

    pub fn from_vec(lat: &LorentzianLattice, n: usize, components: Vec<f64>) -> Self {
        assert_eq!(components.len(), lat.n_sites() * n);
        Variation {
            n_x: lat.n_x,
            n,
            components,
        }
    }

    pub fn at(&self, s: usize) -> &[f64] {
        &self.components[s * self.n..(s + 1) * self.n]
    }

    pub fn n_sites(&self) -> usize {
        self.components.len() / self.n
    }

    /// Exact nonzero set.
    pub fn support(&self, lat: &LorentzianLattice) -> SiteSet {
        let mask = (0..self.n_sites())
            .map(|s| self.at(s).iter().any(|&c| c != 0.0))
            .collect();
        SiteSet::from_mask(lat, mask)
    }

    pub fn scaled(&self, a: f64) -> Variation {
        Variation {
            components: self.components.iter().map(|c| a * c).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Variation) -> Variation {
        Variation {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
            ..self.clone()
        }
    }

    /// Plain pairing with a density-weighted covector.
    pub fn pair(&self, covector: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(covector)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&c| c == 0.0)
    }
}

pub fn relative_support(phi: &FieldConfig, psi: &FieldConfig) -> Result<SiteSet> {
    if !phi.compatible(psi) {
        return Err(Error::MismatchedLattice);
    }
    let n = phi.n();
    let mask = (0..phi.lattice.n_sites())
        .map(|s| phi.values[s * n..(s + 1) * n] != psi.values[s * n..(s + 1) * n])
        .collect();
    Ok(SiteSet::from_mask(&phi.lattice, mask))
}

/// `X(x) = exp^{-1}_{phi0(x)}(psi(x))`.
pub fn chart_forward(phi0: &FieldConfig, psi: &FieldConfig) -> Result<Variation> {
    if !phi0.compatible(psi) {
        return Err(Error::MismatchedLattice);
    }
    let n = phi0.n();
    let per_site: Vec<Result<Vec<f64>>> = (0..phi0.lattice.n_sites())
        .into_par_iter()
        .map(|s| {
            phi0.target
                .exp_inverse(phi0.value(s), psi.value(s), CHART_TOL)
                .map_err(|_| Error::NotChartCompatible(phi0.lattice.point(s)))
        })
        .collect();
    let mut comps = Vec::with_capacity(phi0.values.len());
    for r in per_site {
        comps.extend(r?);
    }
    Ok(Variation::from_vec(&phi0.lattice, n, comps))
}

/// `psi(x) = exp_{phi0(x)}(X(x))`.
pub fn chart_backward(phi0: &FieldConfig, x: &Variation) -> Result<FieldConfig> {
    chart_backward_steps(phi0, x, DEFAULT_GEODESIC_STEPS)
}

pub fn chart_backward_steps(
    phi0: &FieldConfig,
    x: &Variation,
    steps: usize,
) -> Result<FieldConfig> {
    let n = phi0.n();
    if x.components.len() != phi0.values.len() {
        return Err(Error::DimensionMismatch {
            expected: phi0.values.len(),
            got: x.components.len(),
        });
    }
    let per_site: Vec<Result<Vec<f64>>> = (0..phi0.lattice.n_sites())
        .into_par_iter()
        .map(|s| {
            let v = x.at(s);
            if v.iter().all(|&c| c == 0.0) {
                Ok(phi0.value(s).to_vec())
            } else {
                phi0.target
                    .exp_map(phi0.value(s), v, steps)
                    .map_err(|_| Error::ChartOverflowAt(phi0.lattice.point(s)))
            }
        })
        .collect();
    let mut vals = Vec::with_capacity(phi0.values.len());
    for r in per_site {
        vals.extend(r?);
    }
    debug_assert_eq!(vals.len(), phi0.lattice.n_sites() * n);
    phi0.with_values(vals)
}

/// `u_{phi1} o u_{phi2}^{-1}` applied to a variation at `phi2`.
pub fn transition_map(phi1: &FieldConfig, phi2: &FieldConfig, x: &Variation) -> Result<Variation> {
    chart_forward(phi1, &chart_backward(phi2, x)?)
}

/// Pullback of the target Levi-Civita connection along a section.
#[derive(Debug, Clone)]
pub struct PullbackConnection {
    pub n: usize,
    /// `coefficients[s][(i*n + j)*n + k] = {h}^i_jk(phi(s))`.
    pub coefficients: Vec<Vec<f64>>,
}

impl PullbackConnection {
    pub fn new(phi: &FieldConfig) -> Self {
        let coefficients = (0..phi.lattice.n_sites())
            .into_par_iter()
            .map(|s| phi.target.christoffel(phi.value(s)))
            .collect();
        PullbackConnection {
            n: phi.n(),
            coefficients,
        }
    }

    /// `Gamma_phi(X, Y)^i(x) = {h}^i_jk X^j Y^k`.
    pub fn apply(&self, x: &Variation, y: &Variation) -> Variation {
        let n = self.n;
        let mut out = vec![0.0; x.components.len()];
        for (s, gam) in self.coefficients.iter().enumerate() {
            let (xs, ys) = (x.at(s), y.at(s));
            if xs.iter().all(|&c| c == 0.0) || ys.iter().all(|&c| c == 0.0) {
                continue;
            }
            for i in 0..n {
                let mut v = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        v += gam[(i * n + j) * n + k] * xs[j] * ys[k];
                    }
                }
                out[s * n + i] = v;
            }
        }
        Variation {
            components: out,
            ..x.clone()
        }
    }
}

/// Output of [`interpolate_sections`].
#[derive(Debug, Clone)]
pub struct Interpolation {
    /// `phi1` off `supp_{phi0}(phi_m1)`, `phi_m1` off `supp_{phi0}(phi1)`.
    pub glued: FieldConfig,
    /// `exp(X_n) o ... o exp(X_1) o exp(Y_n) o ... o exp(Y_1) o phi0`.
    pub flows_xy: FieldConfig,
    /// The same flows applied in the opposite order.
    pub flows_yx: FieldConfig,
    /// `family[k][l] = phi_(k,l)`, `k, l in 0..=n`.
    pub family: Vec<Vec<FieldConfig>>,
    pub n: usize,
}

/// Glue `phi1` and `phi_m1` along `phi0` and build the interpolating family.
pub fn interpolate_sections(
    phi0: &FieldConfig,
    phi1: &FieldConfig,
    phi_m1: &FieldConfig,
) -> Result<Interpolation> {
    let s1 = relative_support(phi0, phi1)?;
    let sm1 = relative_support(phi0, phi_m1)?;
    if s1.intersects(&sm1) {
        return Err(Error::SupportsNotDisjoint);
    }
    let x1 = chart_forward(phi0, phi1)?;
    let xm1 = chart_forward(phi0, phi_m1)?;
    let lat = &phi0.lattice;
    let dist = (0..lat.n_sites())
        .map(|s| {
            let a = phi0.target.norm(phi0.value(s), x1.at(s));
            let b = phi0.target.norm(phi0.value(s), xm1.at(s));
            a.max(b)
        })
        .fold(0.0, f64::max);
    let radius = phi0.target.observed_newton_radius();
    let n = if radius.is_finite() && radius > 0.0 {
        ((dist / (0.5 * radius)).ceil() as usize).max(1)
    } else {
        1
    };

    // Points along the per-site geodesics; endpoints are the given sections exactly.
    let along = |x: &Variation, end: &FieldConfig, k: usize| -> Result<FieldConfig> {
        if k == n {
            return Ok(end.clone());
        }
        chart_backward(phi0, &x.scaled(k as f64 / n as f64))
    };
    let rows: Vec<FieldConfig> = (0..=n)
        .map(|k| along(&x1, phi1, k))
        .collect::<Result<_>>()?;
    let cols: Vec<FieldConfig> = (0..=n)
        .map(|l| along(&xm1, phi_m1, l))
        .collect::<Result<_>>()?;
    let nn = phi0.n();
    let merge = |a: &FieldConfig, b: &FieldConfig| -> Result<FieldConfig> {
        let mut v = phi0.values.clone();
        for s in 0..lat.n_sites() {
            if s1.contains_index(s) {
                v[s * nn..(s + 1) * nn].copy_from_slice(a.value(s));
            } else if sm1.contains_index(s) {
                v[s * nn..(s + 1) * nn].copy_from_slice(b.value(s));
            }
        }
        phi0.with_values(v)
    };
    let mut family = Vec::with_capacity(n + 1);
    for row in &rows {
        let mut line = Vec::with_capacity(n + 1);
        for col in &cols {
            line.push(merge(row, col)?);
        }
        family.push(line);
    }

    // Compose the step flows X_k = exp^{-1}_{phi_(k-1,l)}(phi_(k,l)) and Y_l in both orders.
    let flow = |start: &FieldConfig, seq: &[(usize, bool)]| -> Result<FieldConfig> {
        let mut cur = start.clone();
        for &(k, is_x) in seq {
            let (from, to) = if is_x {
                (&rows[k - 1], &rows[k])
            } else {
                (&cols[k - 1], &cols[k])
            };
            let step = chart_forward(from, to)?;
            cur = chart_backward(&cur, &step)?;
        }
        Ok(cur)
    };
    let xs: Vec<(usize, bool)> = (1..=n).map(|k| (k, true)).collect();
    let ys: Vec<(usize, bool)> = (1..=n).map(|l| (l, false)).collect();
    let order_a: Vec<_> = ys.iter().chain(xs.iter()).copied().collect();
    let order_b: Vec<_> = xs.iter().chain(ys.iter()).copied().collect();
    let flows_xy = flow(phi0, &order_a)?;
    let flows_yx = flow(phi0, &order_b)?;
    let glued = family[n][n].clone();
    Ok(Interpolation {
        glued,
        flows_xy,
        flows_yx,
        family,
        n,
    })
}

/// Glue directly: `phi1` on `supp_{phi0}(phi1)`, `phi_m1` on `supp_{phi0}(phi_m1)`, `phi0` elsewhere.
pub fn glue_sections(
    phi0: &FieldConfig,
    phi1: &FieldConfig,
    phi_m1: &FieldConfig,
) -> Result<FieldConfig> {
    let s1 = relative_support(phi0, phi1)?;
    let sm1 = relative_support(phi0, phi_m1)?;
    if s1.intersects(&sm1) {
        return Err(Error::SupportsNotDisjoint);
    }
    let n = phi0.n();
    let mut v = phi0.values.clone();
    for s in 0..phi0.lattice.n_sites() {
        if s1.contains_index(s) {
            v[s * n..(s + 1) * n].copy_from_slice(phi1.value(s));
        } else if sm1.contains_index(s) {
            v[s * n..(s + 1) * n].copy_from_slice(phi_m1.value(s));
        }
    }
    phi0.with_values(v)
}
