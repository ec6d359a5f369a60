//! Wave maps `M -> N`: Euler-Lagrange operator, linearization with the curvature
//! term, and bracket scenarios.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::geometry::{TargetGeometry, DEFAULT_GEODESIC_STEPS};
use crate::lattice::{LorentzianLattice, SiteSet};
use crate::observables::{Functional, PointPolynomial};
use crate::peierls::{peierls_bracket, PeierlsContext};
use crate::variational::{
    boundary_rows, discrete, el_kernel, linearize, ELKernel, GeneralizedLagrangian,
    LinearizedOperator,
};

pub const PRESETS: [&str; 3] = [
    "flat-reduction",
    "geodesic-background-bracket",
    "curvature-on",
];

#[derive(Debug, Clone)]
pub struct WaveMapModel {
    pub lattice: Arc<LorentzianLattice>,
    pub target: Arc<TargetGeometry>,
    pub lagrangian: GeneralizedLagrangian,
}

impl WaveMapModel {
    pub fn new(lattice: Arc<LorentzianLattice>, target: TargetGeometry) -> Self {
        let lagrangian = GeneralizedLagrangian::wave_map(target.clone());
        WaveMapModel {
            lattice,
            target: Arc::new(target),
            lagrangian,
        }
    }

    pub fn field(&self, f: impl Fn(f64, f64) -> Vec<f64>) -> Result<FieldConfig> {
        FieldConfig::from_fn(self.lattice.clone(), self.target.clone(), f)
    }

    fn check(&self, phi: &FieldConfig) -> Result<()> {
        if !self.lattice.same_shape(&phi.lattice) || *self.target != *phi.target {
            return Err(Error::MismatchedLattice);
        }
        Ok(())
    }
}

/// Finite-difference jets of `phi` at a site; one-sided at the time ends.
fn centered_jets(phi: &FieldConfig, s: usize) -> (Vec<f64>, Vec<f64>) {
    let lat = &phi.lattice;
    let n = phi.n();
    let p = lat.point(s);
    let at = |it: usize, ix: isize| phi.value(it * lat.n_x + lat.wrap_x(ix)).to_vec();
    let ix = p.ix as isize;
    let (xp, xm) = (at(p.it, ix + 1), at(p.it, ix - 1));
    let yx = (0..n).map(|i| (xp[i] - xm[i]) / (2.0 * lat.dx)).collect();
    let (tp, tm, h) = if p.it == 0 {
        (at(1, ix), at(0, ix), lat.dt)
    } else if p.it + 1 == lat.n_t {
        (at(p.it, ix), at(p.it - 1, ix), lat.dt)
    } else {
        (at(p.it + 1, ix), at(p.it - 1, ix), 2.0 * lat.dt)
    };
    let yt = (0..n).map(|i| (tp[i] - tm[i]) / h).collect();
    (yt, yx)
}

/// Discrete Euler-Lagrange kernel of the wave-map action, written out directly:
/// each one-sided term contributes `1/2 dh P` to its base site and the momenta
/// `g^mumu h y_mu` to the difference endpoints.
pub fn wave_map_el(model: &WaveMapModel, phi: &FieldConfig) -> Result<ELKernel> {
    model.check(phi)?;
    let lat = &phi.lattice;
    let n = phi.n();
    let target = &model.target;
    // (s, a, b) site indices with their contributions.
    type Part = (usize, usize, usize, Vec<f64>, Vec<f64>, Vec<f64>);
    let parts: Vec<Part> = discrete::terms(lat)
        .into_par_iter()
        .map(|t| {
            let (gtt, gxx) = lat.inv_metric(t.s);
            let y = phi.value(t.s);
            let yt: Vec<f64> = (0..n).map(|i| t.ct * (phi.value(t.a)[i] - y[i])).collect();
            let yx: Vec<f64> = (0..n).map(|i| t.cx * (phi.value(t.b)[i] - y[i])).collect();
            let mj = target.metric_jet(y);
            let mut base = vec![0.0; n];
            let mut pt = vec![0.0; n];
            let mut px = vec![0.0; n];
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        base[k] +=
                            0.5 * mj.dh(k, i, j) * (gtt * yt[i] * yt[j] + gxx * yx[i] * yx[j]);
                    }
                    pt[k] += gtt * mj.h(k, i) * yt[i];
                    px[k] += gxx * mj.h(k, i) * yx[i];
                }
            }
            let w = t.weight;
            let at_s = (0..n)
                .map(|k| w * (base[k] - t.ct * pt[k] - t.cx * px[k]))
                .collect();
            let at_a = (0..n).map(|k| w * t.ct * pt[k]).collect();
            let at_b = (0..n).map(|k| w * t.cx * px[k]).collect();
            (t.s, t.a, t.b, at_s, at_a, at_b)
        })
        .collect();
    let mut components = vec![0.0; phi.values.len()];
    for (s, a, b, vs, va, vb) in parts {
        for k in 0..n {
            components[s * n + k] += vs[k];
            components[a * n + k] += va[k];
            components[b * n + k] += vb[k];
        }
    }
    Ok(ELKernel {
        base: phi.clone(),
        components,
        boundary_rows: boundary_rows(lat.n_t),
    })
}

/// The displayed wave-map equation `-vol h_ij g^{mu nu}(phi^i_{mu nu} + {h}^i_kl phi^k_mu phi^l_nu)`
/// with centered second differences; interior rows only (boundary rows are zero).
pub fn wave_map_el_pointwise(model: &WaveMapModel, phi: &FieldConfig) -> Result<ELKernel> {
    model.check(phi)?;
    let lat = &phi.lattice;
    let n = phi.n();
    let target = &model.target;
    let rows = boundary_rows(lat.n_t);
    let components: Vec<f64> = (0..lat.n_sites())
        .into_par_iter()
        .flat_map_iter(|s| {
            let p = lat.point(s);
            if p.it == 0 || p.it + 1 == lat.n_t {
                return vec![0.0; n];
            }
            let (gtt, gxx) = lat.inv_metric(s);
            let y = phi.value(s);
            let at = |it: usize, ix: isize| phi.value(it * lat.n_x + lat.wrap_x(ix));
            let ix = p.ix as isize;
            let (tp, tm) = (at(p.it + 1, ix), at(p.it - 1, ix));
            let (xp, xm) = (at(p.it, ix + 1), at(p.it, ix - 1));
            let (yt, yx) = centered_jets(phi, s);
            let gam = target.christoffel(y);
            let h = target.metric(y);
            let mut acc = vec![0.0; n];
            for i in 0..n {
                let ytt = (tp[i] - 2.0 * y[i] + tm[i]) / (lat.dt * lat.dt);
                let yxx = (xp[i] - 2.0 * y[i] + xm[i]) / (lat.dx * lat.dx);
                let mut v = gtt * ytt + gxx * yxx;
                for k in 0..n {
                    for l in 0..n {
                        v += gam[(i * n + k) * n + l] * (gtt * yt[k] * yt[l] + gxx * yx[k] * yx[l]);
                    }
                }
                acc[i] = v;
            }
            let vol = lat.vol_weight(s);
            (0..n)
                .map(|j| -vol * (0..n).map(|i| h[i * n + j] * acc[i]).sum::<f64>())
                .collect()
        })
        .collect();
    Ok(ELKernel {
        base: phi.clone(),
        components,
        boundary_rows: rows,
    })
}

/// Second variation of the wave-map action assembled from `h`, `dh`, `d2h` directly.
pub fn wave_map_linearized(model: &WaveMapModel, phi: &FieldConfig) -> Result<LinearizedOperator> {
    model.check(phi)?;
    let lat = &phi.lattice;
    let n = phi.n();
    let d = 3 * n;
    let target = &model.target;
    let parts: Vec<(discrete::Term, Vec<f64>)> = discrete::terms(lat)
        .into_par_iter()
        .map(|t| {
            let (gtt, gxx) = lat.inv_metric(t.s);
            let y = phi.value(t.s);
            let yt: Vec<f64> = (0..n).map(|i| t.ct * (phi.value(t.a)[i] - y[i])).collect();
            let yx: Vec<f64> = (0..n).map(|i| t.cx * (phi.value(t.b)[i] - y[i])).collect();
            let mj = target.metric_jet(y);
            let mut m = vec![0.0; d * d];
            for k in 0..n {
                for l in 0..n {
                    let mut yy = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            yy += 0.5
                                * mj.d2h(k, l, i, j)
                                * (gtt * yt[i] * yt[j] + gxx * yx[i] * yx[j]);
                        }
                    }
                    m[k * d + l] = yy;
                    let ty: f64 = (0..n).map(|j| gtt * mj.dh(l, k, j) * yt[j]).sum();
                    let xy: f64 = (0..n).map(|j| gxx * mj.dh(l, k, j) * yx[j]).sum();
                    m[(n + k) * d + l] = ty;
                    m[l * d + n + k] = ty;
                    m[(2 * n + k) * d + l] = xy;
                    m[l * d + 2 * n + k] = xy;
                    m[(n + k) * d + n + l] = gtt * mj.h(k, l);
                    m[(2 * n + k) * d + 2 * n + l] = gxx * mj.h(k, l);
                }
            }
            (t, m)
        })
        .collect();
    let stencil = discrete::assemble(lat, n, parts)?;
    let kappa = model.lagrangian.normalization;
    let symbol = (0..lat.n_sites())
        .map(|s| {
            let (gtt, gxx) = lat.inv_metric(s);
            let id = |c: f64| {
                (0..n * n)
                    .map(|k| if k / n == k % n { kappa * c } else { 0.0 })
                    .collect::<Vec<_>>()
            };
            [id(gtt), id(0.0), id(gxx)]
        })
        .collect();
    let hsharp = (0..lat.n_sites())
        .flat_map(|s| target.metric_inverse(phi.value(s)))
        .collect();
    Ok(LinearizedOperator {
        base: phi.clone(),
        lagrangian: model.lagrangian.clone(),
        h_fiber: (*model.target).clone(),
        stencil,
        symbol,
        hsharp,
    })
}

/// Per site `C_ij = R^k_ilj p^alpha_k phi^l_alpha`, `p^alpha_k = g^{alpha alpha} h_km phi^m_alpha`
/// (centered jets).
pub fn curvature_term(model: &WaveMapModel, phi: &FieldConfig) -> Result<Vec<f64>> {
    model.check(phi)?;
    let lat = &phi.lattice;
    let n = phi.n();
    let target = &model.target;
    Ok((0..lat.n_sites())
        .into_par_iter()
        .flat_map_iter(|s| {
            let (gtt, gxx) = lat.inv_metric(s);
            let y = phi.value(s);
            let (yt, yx) = centered_jets(phi, s);
            let h = target.metric(y);
            let r = target.riemann(y);
            let mut c = vec![0.0; n * n];
            for (g, v) in [(gtt, &yt), (gxx, &yx)] {
                let p: Vec<f64> = (0..n)
                    .map(|k| g * (0..n).map(|m| h[k * n + m] * v[m]).sum::<f64>())
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            for l in 0..n {
                                c[i * n + j] += r[((k * n + i) * n + l) * n + j] * p[k] * v[l];
                            }
                        }
                    }
                }
            }
            c
        })
        .collect())
}

/// Coefficients `A^mu_kl` of `nabla_mu X^k Y^l` in the covariant form of the second
/// variation, per site and direction: `d^2 lambda / dy^k_mu dy^l - g^mumu h_ki {h}^i_lj phi^j_mu`.
/// Returns `(max |A_kl - A_lk| / 2, max |A|)` over all sites.
pub fn a_coefficient_check(model: &WaveMapModel, phi: &FieldConfig) -> Result<(f64, f64)> {
    model.check(phi)?;
    let lat = &phi.lattice;
    let n = phi.n();
    let d = 3 * n;
    let dens = model.lagrangian.density.clone();
    let target = &model.target;
    let per_site: Vec<(f64, f64)> = (0..lat.n_sites())
        .into_par_iter()
        .map(|s| {
            let p = lat.point(s);
            let (gtt, gxx) = lat.inv_metric(s);
            let y = phi.value(s);
            let (yt, yx) = centered_jets(phi, s);
            let ctx = crate::variational::JetCtx {
                site: s,
                it: p.it,
                ix: p.ix,
                gtt,
                gxx,
                sigma_t: 1.0,
                sigma_x: 1.0,
                dt: lat.dt,
                dx: lat.dx,
            };
            let jd = dens.derivs(&ctx, y, &yt, &yx, 2);
            let h = target.metric(y);
            let gam = target.christoffel(y);
            let mut anti: f64 = 0.0;
            let mut size: f64 = 0.0;
            for (mu, g, v) in [(1, gtt, &yt), (2, gxx, &yx)] {
                let a = |k: usize, l: usize| {
                    let mut conn = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            conn += h[k * n + i] * gam[(i * n + l) * n + j] * v[j];
                        }
                    }
                    jd.hess[(mu * n + k) * d + l] - g * conn
                };
                for k in 0..n {
                    for l in 0..n {
                        anti = anti.max(0.5 * (a(k, l) - a(l, k)).abs());
                        size = size.max(a(k, l).abs());
                    }
                }
            }
            (anti, size)
        })
        .collect();
    Ok(per_site
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a.max(x), b.max(y))))
}

/// Discrete energy per time row for the flat reduction: `sum_x dx (1/2 phi_t^2 + 1/2 phi_x^2)`
/// with `phi_t` averaged across the two adjacent half steps.
pub fn flat_energy(phi: &FieldConfig) -> Vec<f64> {
    let lat = &phi.lattice;
    let n = phi.n();
    (0..lat.n_t - 1)
        .map(|it| {
            let mut e = 0.0;
            for ix in 0..lat.n_x {
                let s = it * lat.n_x + ix;
                let up = s + lat.n_x;
                let right = it * lat.n_x + lat.wrap_x(ix as isize + 1);
                let right_up = right + lat.n_x;
                for i in 0..n {
                    let vt = (phi.values[up * n + i] - phi.values[s * n + i]) / lat.dt;
                    let gx0 = (phi.values[right * n + i] - phi.values[s * n + i]) / lat.dx;
                    let gx1 = (phi.values[right_up * n + i] - phi.values[up * n + i]) / lat.dx;
                    e += lat.dx * 0.5 * (vt * vt + gx0 * gx1);
                }
            }
            e
        })
        .collect()
}

/// Bracket test data on a physical domain `[0, T] x [0, L)` at a given refinement level.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRow {
    pub n_t: usize,
    pub n_x: usize,
    pub value: f64,
    pub reference: f64,
    pub difference: f64,
    pub antisymmetry: f64,
    pub support_check: bool,
    pub disjoint_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub preset: String,
    pub rows: Vec<ScenarioRow>,
    pub passed: bool,
}

pub const DOMAIN_T: f64 = 1.0;
pub const DOMAIN_L: f64 = 2.0;

/// `n_x = base * 2^level` cells across `L`, `dt = dx / 2`, `n_t` covering `T`.
pub fn preset_lattice(base: usize, level: usize) -> Result<Arc<LorentzianLattice>> {
    let n_x = base << level;
    let dx = DOMAIN_L / n_x as f64;
    let dt = 0.5 * dx;
    let n_t = (DOMAIN_T / dt).round() as usize + 1;
    Ok(Arc::new(LorentzianLattice::minkowski(n_t, n_x, dt, dx)?))
}

/// Compactly supported smooth bump `cos^2` of radius `r` around `(t0, x0)`, times `dir`.
pub fn bump_weights(
    lat: &LorentzianLattice,
    n: usize,
    t0: f64,
    x0: f64,
    r: f64,
    dir: &[f64],
) -> Vec<f64> {
    let mut w = vec![0.0; lat.n_sites() * n];
    for s in 0..lat.n_sites() {
        let p = lat.point(s);
        let t = p.it as f64 * lat.dt;
        let mut dx = (p.ix as f64 * lat.dx - x0).abs();
        let period = lat.n_x as f64 * lat.dx;
        dx = dx.min(period - dx);
        let rho = ((t - t0).powi(2) + dx * dx).sqrt() / r;
        if rho < 1.0 {
            let b = (0.5 * std::f64::consts::PI * rho).cos().powi(2);
            for i in 0..n {
                w[s * n + i] = b * dir[i];
            }
        }
    }
    w
}

fn scenario_functionals(lat: &LorentzianLattice, n: usize) -> (Functional, Functional, Functional) {
    // amplitudes chosen so bracket values are O(1e-2) at the preset resolutions
    let d0: Vec<f64> = if n == 1 { vec![10.0] } else { vec![10.0, 5.0] };
    let d1: Vec<f64> = if n == 1 { vec![10.0] } else { vec![-3.0, 10.0] };
    let f = PointPolynomial::linear(lat, n, bump_weights(lat, n, 0.75, 1.0, 0.15, &d0));
    let g = PointPolynomial::polynomial(
        lat,
        n,
        bump_weights(lat, n, 0.3, 1.1, 0.15, &d1),
        [1.0, 0.5, 0.0],
    );
    // spacelike to f: same time, far in x
    let far = PointPolynomial::linear(lat, n, bump_weights(lat, n, 0.75, 0.0, 0.1, &d1));
    (f, g, far)
}

fn bracket_row(
    gl: &GeneralizedLagrangian,
    phi: &FieldConfig,
    reference: f64,
) -> Result<ScenarioRow> {
    let lat = &phi.lattice;
    let (f, g, far) = scenario_functionals(lat, phi.n());
    let rep = peierls_bracket(gl, &f, &g, phi)?;
    let ctx = PeierlsContext::new(gl, phi)?;
    let back = ctx.bracket(&g, &f)?;
    let disjoint_value = ctx.bracket(&f, &far)?;
    Ok(ScenarioRow {
        n_t: lat.n_t,
        n_x: lat.n_x,
        value: rep.value,
        reference,
        difference: (rep.value - reference).abs(),
        antisymmetry: (rep.value + back).abs(),
        support_check: rep.support_check,
        disjoint_value,
    })
}

/// Geodesic background `phi(t, x) = exp_p(t v)` on the sphere.
pub fn geodesic_background(
    lat: Arc<LorentzianLattice>,
    p: &[f64],
    v: &[f64],
) -> Result<FieldConfig> {
    let target = Arc::new(TargetGeometry::Sphere2Stereographic);
    let rows: Vec<Vec<f64>> = (0..lat.n_t)
        .map(|it| {
            let t = it as f64 * lat.dt;
            let tv: Vec<f64> = v.iter().map(|c| c * t).collect();
            target.exp_map(p, &tv, 4 * DEFAULT_GEODESIC_STEPS)
        })
        .collect::<Result<_>>()?;
    let values = (0..lat.n_sites())
        .flat_map(|s| rows[s / lat.n_x].clone())
        .collect();
    FieldConfig::new(lat, target, values)
}

/// Small-amplitude sphere background with nonzero first jets.
pub fn wavy_background(lat: Arc<LorentzianLattice>, target: TargetGeometry) -> Result<FieldConfig> {
    let k = std::f64::consts::PI;
    FieldConfig::from_fn(lat, Arc::new(target), |t, x| {
        vec![
            0.25 * (k * x).sin() * (1.0 + 0.5 * t),
            0.2 * (k * x + 1.3 * t).cos(),
        ]
    })
}

/// Run a named preset at `levels` refinement levels (base `n_x = 32`).
pub fn run_wavemap_scenario(preset: &str, levels: usize) -> Result<ScenarioReport> {
    if !PRESETS.contains(&preset) {
        return Err(Error::UnknownName(preset.to_string()));
    }
    let rows: Vec<ScenarioRow> = (0..levels)
        .into_par_iter()
        .map(|level| {
            let lat = preset_lattice(32, level)?;
            match preset {
                "flat-reduction" => {
                    let model = WaveMapModel::new(lat.clone(), TargetGeometry::Flat { dim: 1 });
                    let phi =
                        model.field(|t, x| vec![0.3 * (std::f64::consts::PI * (x - t)).sin()])?;
                    let reference = {
                        let (f, g, _) = scenario_functionals(&lat, 1);
                        PeierlsContext::new(&GeneralizedLagrangian::free_scalar(), &phi)?
                            .bracket(&f, &g)?
                    };
                    bracket_row(&model.lagrangian, &phi, reference)
                }
                "geodesic-background-bracket" => {
                    let model =
                        WaveMapModel::new(lat.clone(), TargetGeometry::Sphere2Stereographic);
                    let phi = geodesic_background(lat.clone(), &[0.1, -0.05], &[0.3, 0.2])?;
                    bracket_row(&model.lagrangian, &phi, 0.0)
                }
                _ => {
                    let model =
                        WaveMapModel::new(lat.clone(), TargetGeometry::Sphere2Stereographic);
                    let phi = wavy_background(lat.clone(), TargetGeometry::Sphere2Stereographic)?;
                    let flat = wavy_background(lat.clone(), TargetGeometry::Flat { dim: 2 })?;
                    let (f, g, _) = scenario_functionals(&lat, 2);
                    let flat_gl = GeneralizedLagrangian::wave_map(TargetGeometry::Flat { dim: 2 });
                    let reference = PeierlsContext::new(&flat_gl, &flat)?.bracket(&f, &g)?;
                    bracket_row(&model.lagrangian, &phi, reference)
                }
            }
        })
        .collect::<Result<_>>()?;
    let passed = rows.iter().all(|r| {
        let scale = 1f64.max(r.value.abs());
        let base = r.support_check
            && r.antisymmetry < 1e-12 * scale
            && r.disjoint_value.abs() < 1e-12 * scale;
        base && match preset {
            "flat-reduction" => r.difference < 1e-10 * scale,
            "curvature-on" => r.difference > 1e-4,
            _ => true,
        }
    });
    Ok(ScenarioReport {
        preset: preset.to_string(),
        rows,
        passed,
    })
}

/// Generic linearization of the model (reference for [`wave_map_linearized`]).
pub fn generic_linearized(model: &WaveMapModel, phi: &FieldConfig) -> Result<LinearizedOperator> {
    linearize(&model.lagrangian, phi, &model.target)
}

/// Generic EL kernel of the model (reference for [`wave_map_el`]).
pub fn generic_el(model: &WaveMapModel, phi: &FieldConfig) -> Result<ELKernel> {
    el_kernel(&model.lagrangian, phi)
}

/// Sites of the lattice within the physical window `[t0, t1] x [x0, x1]`.
pub fn window(lat: &LorentzianLattice, t: (f64, f64), x: (f64, f64)) -> SiteSet {
    let mask = (0..lat.n_sites())
        .map(|s| {
            let p = lat.point(s);
            let (tt, xx) = (p.it as f64 * lat.dt, p.ix as f64 * lat.dx);
            tt >= t.0 && tt <= t.1 && xx >= x.0 && xx <= x.1
        })
        .collect();
    SiteSet::from_mask(lat, mask)
}
