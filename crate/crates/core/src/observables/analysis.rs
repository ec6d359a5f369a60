//! Support probing, covariant Hessians, additivity tests and class tagging.

use rayon::prelude::*;
use serde::Serialize;

use super::{Functional, FunctionalClass};
use crate::error::{Error, Result};
use crate::field::{
    chart_backward, interpolate_sections, FieldConfig, PullbackConnection, Variation,
};
use crate::lattice::{LorentzianLattice, SiteSet};

/// Adjacent-jump ratio above which a kernel is flagged boundary-singular.
pub const JUMP_THRESHOLD: f64 = 10.0;

const DENSE_LIMIT: usize = 4096;

/// Union over samples of the sites where `F` reacts to the field.
///
/// Uses `kernel1` when available, otherwise perturbs every site component by
/// `probe_amplitude` and compares values.
pub fn probe_support(
    f: &Functional,
    samples: &[FieldConfig],
    probe_amplitude: f64,
) -> Result<SiteSet> {
    let lat = match samples.first() {
        Some(p) => p.lattice.clone(),
        None => return Err(Error::EmptySupport),
    };
    let mut mask = vec![false; lat.n_sites()];
    for phi in samples {
        let n = phi.n();
        if f.has_kernel1() {
            let k = f.kernel1(phi)?;
            let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (idx, v) in k.iter().enumerate() {
                if v.abs() > 1e-14 * scale && *v != 0.0 {
                    mask[idx / n] = true;
                }
            }
        } else {
            let base = f.evaluate(phi)?;
            let tol = 1e-12 * base.abs().max(1.0);
            let hits: Vec<bool> = (0..lat.n_sites())
                .into_par_iter()
                .map(|s| {
                    (0..n).any(|i| {
                        [probe_amplitude, -probe_amplitude].iter().any(|&a| {
                            let mut v = phi.values.clone();
                            v[s * n + i] += a;
                            match phi.with_values(v).and_then(|p| f.evaluate(&p)) {
                                Ok(val) => (val - base).abs() > tol,
                                Err(_) => false,
                            }
                        })
                    })
                })
                .collect();
            for (m, h) in mask.iter_mut().zip(hits) {
                *m |= h;
            }
        }
    }
    Ok(SiteSet::from_mask(&lat, mask))
}

/// `F''(X, Y) + F'(Gamma(X, Y))`.
pub fn covariant_hessian(
    f: &Functional,
    phi: &FieldConfig,
    conn: &PullbackConnection,
    x: &Variation,
    y: &Variation,
) -> Result<f64> {
    let k2 = f.kernel2(phi)?;
    let k1 = f.kernel1(phi)?;
    let gamma = conn.apply(x, y);
    Ok(k2.bilinear(&x.components, &y.components) + gamma.pair(&k1))
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// Compare `F(u^{-1}(X1 + Xm1))` with `F(u^{-1}(X1)) - F(phi0) + F(u^{-1}(Xm1))`.
pub fn additivity_test(
    f: &Functional,
    phi0: &FieldConfig,
    x1: &Variation,
    xm1: &Variation,
) -> Result<AdditivityReport> {
    let lat = &phi0.lattice;
    if x1.support(lat).intersects(&xm1.support(lat)) {
        return Err(Error::SupportsNotDisjoint);
    }
    let at = |x: &Variation| -> Result<f64> { f.evaluate(&chart_backward(phi0, x)?) };
    let lhs = at(&x1.add(xm1))?;
    let f0 = f.evaluate(phi0)?;
    let (f1, fm1) = (at(x1)?, at(xm1)?);
    let rhs = f1 - f0 + fm1;
    let scale = [1.0, lhs.abs(), f0.abs(), f1.abs(), fm1.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    Ok(AdditivityReport {
        lhs,
        rhs,
        passed: (lhs - rhs).abs() <= 1e-10 * scale,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GlobalAdditivityReport {
    /// `F(phi)` at the glued section.
    pub lhs: f64,
    /// `F(phi1) - F(phi0) + F(phi_m1)`.
    pub rhs: f64,
    pub passed: bool,
    /// Whether the other orientation `F(phi1) + F(phi0) - F(phi_m1)` also holds.
    pub printed_orientation_holds: bool,
}

pub fn global_additivity_test(
    f: &Functional,
    phi1: &FieldConfig,
    phi0: &FieldConfig,
    phi_m1: &FieldConfig,
) -> Result<GlobalAdditivityReport> {
    let glued = interpolate_sections(phi0, phi1, phi_m1)?.glued;
    global_additivity_glued(f, &glued, phi1, phi0, phi_m1)
}

/// [`global_additivity_test`] with the glued section already computed, so one
/// gluing can serve many functionals.
pub fn global_additivity_glued(
    f: &Functional,
    glued: &FieldConfig,
    phi1: &FieldConfig,
    phi0: &FieldConfig,
    phi_m1: &FieldConfig,
) -> Result<GlobalAdditivityReport> {
    let lhs = f.evaluate(glued)?;
    let (f1, f0, fm1) = (f.evaluate(phi1)?, f.evaluate(phi0)?, f.evaluate(phi_m1)?);
    let rhs = f1 - f0 + fm1;
    let alt = f1 + f0 - fm1;
    let scale = [1.0, lhs.abs(), f0.abs(), f1.abs(), fm1.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    Ok(GlobalAdditivityReport {
        lhs,
        rhs,
        passed: (lhs - rhs).abs() <= tol,
        printed_orientation_holds: (lhs - alt).abs() <= tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub tag: FunctionalClass,
    pub regular: bool,
    pub local: bool,
    pub microlocal_surrogate: bool,
    pub boundary_singular: bool,
    /// Largest Hessian entry between sites more than one step apart, relative to the largest entry.
    pub off_diagonal: f64,
    pub max_jump_ratio: f64,
}

/// Largest adjacent jump of `kernel1 / vol` divided by the median nonzero adjacent jump.
pub fn jump_ratio(lat: &LorentzianLattice, n: usize, k1: &[f64]) -> f64 {
    let mut jumps = Vec::new();
    for s in 0..lat.n_sites() {
        let p = lat.point(s);
        let mut nbrs = vec![p.it * lat.n_x + lat.wrap_x(p.ix as isize + 1)];
        if p.it + 1 < lat.n_t {
            nbrs.push(s + lat.n_x);
        }
        for nb in nbrs {
            for i in 0..n {
                let a = k1[s * n + i] / lat.vol_weight(s);
                let b = k1[nb * n + i] / lat.vol_weight(nb);
                let d = (a - b).abs();
                if d > 0.0 {
                    jumps.push(d);
                }
            }
        }
    }
    if jumps.is_empty() {
        return 0.0;
    }
    jumps.sort_by(|a, b| a.total_cmp(b));
    let max = *jumps.last().unwrap();
    let median = jumps[jumps.len() / 2];
    max / median
}

/// Dense Hessian columns restricted to `rows`/`cols` index lists (component indices).
fn hessian_block(f: &Functional, phi: &FieldConfig, cols: &[usize]) -> Result<Vec<Vec<f64>>> {
    let dim = phi.values.len();
    if f.has_kernel2() {
        let h = f.kernel2(phi)?;
        return Ok(cols
            .par_iter()
            .map(|&c| {
                let mut e = vec![0.0; dim];
                e[c] = 1.0;
                h.apply(&e)
            })
            .collect());
    }
    cols.par_iter()
        .map(|&c| {
            let step = 1e-5 * (1.0 + phi.values[c].abs());
            let shifted = |a: f64| -> Result<Vec<f64>> {
                let mut v = phi.values.clone();
                v[c] += a;
                f.kernel1(&phi.with_values(v)?)
            };
            let (p1, m1, p2, m2) = (
                shifted(step)?,
                shifted(-step)?,
                shifted(2.0 * step)?,
                shifted(-2.0 * step)?,
            );
            Ok((0..dim)
                .map(|r| (8.0 * (p1[r] - m1[r]) - (p2[r] - m2[r])) / (12.0 * step))
                .collect())
        })
        .collect()
}

/// Discrete class tag.
///
/// Local means the Hessian vanishes (to 1e-8 relative) between sites further
/// apart than one lattice step; the microlocal surrogate additionally requires
/// no boundary spike in `kernel1`.
pub fn classify(f: &Functional, samples: &[FieldConfig]) -> Result<ClassReport> {
    if !f.has_kernel1() || samples.is_empty() {
        return Ok(ClassReport {
            tag: FunctionalClass::Generic,
            regular: false,
            local: false,
            microlocal_surrogate: false,
            boundary_singular: false,
            off_diagonal: f64::NAN,
            max_jump_ratio: f64::NAN,
        });
    }
    let lat = samples[0].lattice.clone();
    let n = samples[0].n();
    let support = match &f.support {
        Some(s) => s.clone(),
        None => probe_support(f, samples, 1e-3)?,
    };
    let region = if support.len() * n <= DENSE_LIMIT {
        support.dilate(2)
    } else {
        support.clone()
    };
    let idx: Vec<usize> = region
        .points()
        .iter()
        .flat_map(|p| {
            let s = lat.site(*p);
            (0..n).map(move |i| s * n + i)
        })
        .collect();
    let mut regular = true;
    let mut off: f64 = 0.0;
    let mut max_jump: f64 = 0.0;
    for phi in samples {
        let k1 = f.kernel1(phi)?;
        regular &= k1.iter().all(|v| v.is_finite());
        max_jump = max_jump.max(jump_ratio(&lat, n, &k1));
        if idx.len() > DENSE_LIMIT {
            continue;
        }
        let cols = hessian_block(f, phi, &idx)?;
        let mut big: f64 = 0.0;
        let mut far: f64 = 0.0;
        for (c, col) in idx.iter().zip(&cols) {
            for (r, v) in col.iter().enumerate() {
                regular &= v.is_finite();
                big = big.max(v.abs());
                if lat.site_distance(r / n, c / n) > 1 {
                    far = far.max(v.abs());
                }
            }
        }
        if big > 0.0 {
            off = off.max(far / big.max(1.0));
        }
    }
    let local = regular && off <= 1e-8;
    let boundary_singular = max_jump > JUMP_THRESHOLD;
    let microlocal_surrogate = local && !boundary_singular;
    let tag = if microlocal_surrogate {
        FunctionalClass::Microlocal
    } else if local {
        FunctionalClass::Local
    } else if regular {
        FunctionalClass::Regular
    } else {
        FunctionalClass::Generic
    };
    Ok(ClassReport {
        tag,
        regular,
        local,
        microlocal_surrogate,
        boundary_singular,
        off_diagonal: off,
        max_jump_ratio: max_jump,
    })
}
