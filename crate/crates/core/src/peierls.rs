//! Retarded and advanced products, the Peierls bracket and its algebraic checks.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldConfig, Variation};
use crate::green::{GreenKind, GreenOperator};
use crate::lattice::SiteSet;
use crate::observables::{Functional, FunctionalClass, FunctionalImpl, Hessian, LinearMap};
use crate::variational::{discrete, linearize, GeneralizedLagrangian};

pub use crate::observables::smooth_compose;

/// Linearized operator and retarded Green operator at one background.
#[derive(Debug, Clone)]
pub struct PeierlsContext {
    pub lagrangian: GeneralizedLagrangian,
    pub phi: FieldConfig,
    pub green: GreenOperator,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PeierlsContext {
    pub fn new(gl: &GeneralizedLagrangian, phi: &FieldConfig) -> Result<Self> {
        let op = linearize(gl, phi, &phi.target)?;
        let green = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
        Ok(PeierlsContext {
            lagrangian: gl.clone(),
            phi: phi.clone(),
            green,
        })
    }

    pub fn solve(&self, kind: GreenKind, source: &[f64]) -> Result<Vec<f64>> {
        self.green.with_kind(kind).apply_raw(source)
    }

    /// `<F', G+ G'>`
    pub fn retarded_product(&self, f: &Functional, g: &Functional) -> Result<f64> {
        let (f1, g1) = (f.kernel1(&self.phi)?, g.kernel1(&self.phi)?);
        Ok(dot(&f1, &self.solve(GreenKind::Retarded, &g1)?))
    }

    /// `<F', G- G'>`
    pub fn advanced_product(&self, f: &Functional, g: &Functional) -> Result<f64> {
        let (f1, g1) = (f.kernel1(&self.phi)?, g.kernel1(&self.phi)?);
        Ok(dot(&f1, &self.solve(GreenKind::Advanced, &g1)?))
    }

    pub fn bracket(&self, f: &Functional, g: &Functional) -> Result<f64> {
        let (f1, g1) = (f.kernel1(&self.phi)?, g.kernel1(&self.phi)?);
        Ok(dot(&f1, &self.solve(GreenKind::Causal, &g1)?))
    }

    /// Gradient of `phi -> {G, H}(phi)`:
    /// `G'' G H' - H'' G G' - T(G- G', G+ H', .) + T(G+ G', G- H', .)`.
    pub fn bracket_gradient(&self, g: &Functional, h: &Functional) -> Result<Vec<f64>> {
        let phi = &self.phi;
        let (g1, h1) = (g.kernel1(phi)?, h.kernel1(phi)?);
        let (g2, h2) = (g.kernel2(phi)?, h.kernel2(phi)?);
        let ret_g = self.solve(GreenKind::Retarded, &g1)?;
        let adv_g = self.solve(GreenKind::Advanced, &g1)?;
        let ret_h = self.solve(GreenKind::Retarded, &h1)?;
        let adv_h = self.solve(GreenKind::Advanced, &h1)?;
        let caus_h: Vec<f64> = ret_h.iter().zip(&adv_h).map(|(r, a)| r - a).collect();
        let caus_g: Vec<f64> = ret_g.iter().zip(&adv_g).map(|(r, a)| r - a).collect();
        let dens = self.lagrangian.density.as_ref();
        let lat = &phi.lattice;
        let t1 = discrete::third_contract(dens, lat, &phi.values, None, &adv_g, &ret_h);
        let t2 = discrete::third_contract(dens, lat, &phi.values, None, &ret_g, &adv_h);
        let a = g2.apply(&caus_h);
        let b = h2.apply(&caus_g);
        Ok((0..a.len()).map(|k| a[k] - b[k] - t1[k] + t2[k]).collect())
    }
}

/// Stage timings are kept out of the deterministic part of reports.
#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub value: f64,
    pub retarded_product: f64,
    pub advanced_product: f64,
    /// `R(F, G) - R(G, F)`
    pub alternative_form: f64,
    pub forms_agree: bool,
    pub support_check: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lagrangian_locality_check: Option<bool>,
    #[serde(skip)]
    pub timings: BTreeMap<String, f64>,
}

pub fn retarded_product(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    phi: &FieldConfig,
) -> Result<f64> {
    PeierlsContext::new(gl, phi)?.retarded_product(f, g)
}

pub fn advanced_product(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    phi: &FieldConfig,
) -> Result<f64> {
    PeierlsContext::new(gl, phi)?.advanced_product(f, g)
}

fn declared_or_probed(f: &Functional, phi: &FieldConfig) -> Result<SiteSet> {
    match &f.support {
        Some(s) => Ok(s.clone()),
        None => {
            let k = f.kernel1(phi)?;
            let n = phi.n();
            let mask = (0..phi.lattice.n_sites())
                .map(|s| k[s * n..(s + 1) * n].iter().any(|v| *v != 0.0))
                .collect();
            Ok(SiteSet::from_mask(&phi.lattice, mask))
        }
    }
}

/// `(J+(F) U J-(F)) n (J+(G) U J-(G))`, the region the bracket can depend on.
pub fn bracket_region(f: &Functional, g: &Functional, phi: &FieldConfig) -> Result<SiteSet> {
    let lat = &phi.lattice;
    let (sf, sg) = (declared_or_probed(f, phi)?, declared_or_probed(g, phi)?);
    Ok(lat.causal_hull(&sf).intersection(&lat.causal_hull(&sg)))
}

pub fn peierls_bracket(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    phi: &FieldConfig,
) -> Result<BracketReport> {
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let ctx = PeierlsContext::new(gl, phi)?;
    timings.insert("linearize".to_string(), t0.elapsed().as_secs_f64());
    let t1 = Instant::now();
    let (f1, g1) = (f.kernel1(phi)?, g.kernel1(phi)?);
    let ret_g = ctx.solve(GreenKind::Retarded, &g1)?;
    let adv_g = ctx.solve(GreenKind::Advanced, &g1)?;
    let ret_f = ctx.solve(GreenKind::Retarded, &f1)?;
    timings.insert("solve".to_string(), t1.elapsed().as_secs_f64());
    let r = dot(&f1, &ret_g);
    let a = dot(&f1, &adv_g);
    let value = r - a;
    let alternative_form = r - dot(&g1, &ret_f);
    let scale = 1f64.max(r.abs()).max(a.abs());
    let forms_agree = (value - alternative_form).abs() <= 1e-10 * scale;

    let t2 = Instant::now();
    let support_check = bracket_support_check(gl, f, g, phi, value, scale)?;
    timings.insert("support_check".to_string(), t2.elapsed().as_secs_f64());
    Ok(BracketReport {
        value,
        retarded_product: r,
        advanced_product: a,
        alternative_form,
        forms_agree,
        support_check,
        lagrangian_locality_check: None,
        timings,
    })
}

/// Perturb the background off the (dilated) bracket region and require the bracket to stay put.
fn bracket_support_check(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    phi: &FieldConfig,
    value: f64,
    scale: f64,
) -> Result<bool> {
    let lat = &phi.lattice;
    let keep = bracket_region(f, g, phi)?.dilate(2);
    let n = phi.n();
    let mut values = phi.values.clone();
    let mut touched = false;
    for s in 0..lat.n_sites() {
        if keep.contains_index(s) {
            continue;
        }
        touched = true;
        for i in 0..n {
            values[s * n + i] += 0.05 * ((s * n + i) as f64 * 0.7).sin();
        }
    }
    if !touched {
        return Ok(true);
    }
    let Ok(psi) = phi.with_values(values) else {
        return Ok(true);
    };
    let moved = PeierlsContext::new(gl, &psi)?.bracket(f, g)?;
    Ok((moved - value).abs() <= 1e-10 * scale)
}

/// Outcome of [`lagrangian_locality_check`].
#[derive(Debug, Clone, Serialize)]
pub struct LocalityReport {
    pub passed: bool,
    pub deviation: f64,
    /// The modification window meets the bracket region.
    pub overlaps_hull: bool,
}

/// Compare `{F, G}` for two Lagrangians that differ on `window`. With `strict`,
/// a window meeting the bracket region is rejected instead of evaluated.
pub fn lagrangian_locality_check(
    l1: &GeneralizedLagrangian,
    l2: &GeneralizedLagrangian,
    window: &SiteSet,
    f: &Functional,
    g: &Functional,
    phi: &FieldConfig,
    strict: bool,
) -> Result<LocalityReport> {
    let region = bracket_region(f, g, phi)?;
    let overlaps_hull = window.dilate(1).intersects(&region);
    if strict && overlaps_hull {
        return Err(Error::ModificationOverlapsHull);
    }
    let c1 = PeierlsContext::new(l1, phi)?;
    let c2 = PeierlsContext::new(l2, phi)?;
    let (r1, a1) = (c1.retarded_product(f, g)?, c1.advanced_product(f, g)?);
    let v2 = c2.bracket(f, g)?;
    let scale = 1f64.max(r1.abs()).max(a1.abs());
    let deviation = ((r1 - a1) - v2).abs();
    Ok(LocalityReport {
        passed: deviation < 1e-10 * scale,
        deviation,
        overlaps_hull,
    })
}

/// The bracket `phi -> {F, G}(phi)` as a functional with an analytic first kernel.
#[derive(Debug, Clone)]
struct BracketFunctional {
    lagrangian: GeneralizedLagrangian,
    f: Functional,
    g: Functional,
}

impl FunctionalImpl for BracketFunctional {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        PeierlsContext::new(&self.lagrangian, phi)?.bracket(&self.f, &self.g)
    }
    fn has_kernel1(&self) -> bool {
        self.f.has_kernel2() && self.g.has_kernel2()
    }
    fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        PeierlsContext::new(&self.lagrangian, phi)?.bracket_gradient(&self.f, &self.g)
    }
}

pub fn bracket_functional(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
) -> Functional {
    let name = format!("{{{}, {}}}", f.name, g.name);
    let class = f.class.min(g.class).min(FunctionalClass::Regular);
    Functional::new(
        BracketFunctional {
            lagrangian: gl.clone(),
            f: f.clone(),
            g: g.clone(),
        },
        class,
        None,
        name,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiReport {
    /// `{F,{G,H}}`, `{G,{H,F}}`, `{H,{F,G}}`
    pub terms: [f64; 3],
    pub residual: f64,
    pub scale: f64,
}

pub fn jacobi_report(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    h: &Functional,
    phi: &FieldConfig,
) -> Result<JacobiReport> {
    let ctx = PeierlsContext::new(gl, phi)?;
    let outer = |a: &Functional, b: &Functional, c: &Functional| -> Result<f64> {
        let a1 = a.kernel1(phi)?;
        let inner = ctx.bracket_gradient(b, c)?;
        Ok(dot(&a1, &ctx.solve(GreenKind::Causal, &inner)?))
    };
    let terms = [outer(f, g, h)?, outer(g, h, f)?, outer(h, f, g)?];
    let residual = terms.iter().sum::<f64>().abs();
    let scale = terms.iter().fold(1f64, |m, t| m.max(t.abs()));
    Ok(JacobiReport {
        terms,
        residual,
        scale,
    })
}

pub fn jacobi_residual(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    h: &Functional,
    phi: &FieldConfig,
) -> Result<f64> {
    Ok(jacobi_report(gl, f, g, h, phi)?.residual)
}

/// Central-difference gradient of `phi -> {G, H}(phi)` (cross-check mode).
pub fn bracket_gradient_fd(
    gl: &GeneralizedLagrangian,
    g: &Functional,
    h: &Functional,
    phi: &FieldConfig,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    (0..phi.values.len())
        .into_par_iter()
        .map(|k| {
            let step = 1e-5 * (1.0 + phi.values[k].abs());
            let at = |a: f64| -> Result<f64> {
                let mut v = phi.values.clone();
                v[k] += a;
                PeierlsContext::new(gl, &phi.with_values(v)?)?.bracket(g, h)
            };
            Ok(
                (8.0 * (at(step)? - at(-step)?) - (at(2.0 * step)? - at(-2.0 * step)?))
                    / (12.0 * step),
            )
        })
        .collect()
}

/// `|{F, G H} - G {F, H} - {F, G} H|`
pub fn leibniz_check(
    gl: &GeneralizedLagrangian,
    f: &Functional,
    g: &Functional,
    h: &Functional,
    phi: &FieldConfig,
) -> Result<f64> {
    let ctx = PeierlsContext::new(gl, phi)?;
    let lhs = ctx.bracket(f, &g.mul(h))?;
    let rhs = g.evaluate(phi)? * ctx.bracket(f, h)? + ctx.bracket(f, g)? * h.evaluate(phi)?;
    Ok((lhs - rhs).abs())
}

/// Field of variations `phi -> X_phi` defining an on-shell ideal element.
#[derive(Debug, Clone)]
pub enum VariationFamily {
    Fixed(Variation),
    /// `X_phi = alpha . phi` componentwise.
    Scaled(Vec<f64>),
}

#[derive(Debug, Clone)]
struct IdealElement {
    lagrangian: GeneralizedLagrangian,
    family: VariationFamily,
}

impl IdealElement {
    fn direction(&self, phi: &FieldConfig) -> Vec<f64> {
        match &self.family {
            VariationFamily::Fixed(x) => x.components.clone(),
            VariationFamily::Scaled(alpha) => {
                alpha.iter().zip(&phi.values).map(|(a, p)| a * p).collect()
            }
        }
    }
}

#[derive(Debug)]
struct IdealHessian {
    lagrangian: GeneralizedLagrangian,
    phi: FieldConfig,
    x: Vec<f64>,
    alpha: Option<Vec<f64>>,
    k: crate::variational::BlockStencil,
}

impl LinearMap for IdealHessian {
    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let phi = &self.phi;
        let mut out = discrete::third_contract(
            self.lagrangian.density.as_ref(),
            &phi.lattice,
            &phi.values,
            None,
            &self.x,
            z,
        );
        if let Some(alpha) = &self.alpha {
            let kz = self.k.apply(z);
            let az: Vec<f64> = alpha.iter().zip(z).map(|(a, v)| a * v).collect();
            let kaz = self.k.apply(&az);
            for k in 0..out.len() {
                out[k] += alpha[k] * kz[k] + kaz[k];
            }
        }
        out
    }
}

impl FunctionalImpl for IdealElement {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        let e = discrete::gradient(
            self.lagrangian.density.as_ref(),
            &phi.lattice,
            &phi.values,
            None,
        );
        Ok(dot(&self.direction(phi), &e))
    }
    fn has_kernel1(&self) -> bool {
        true
    }
    fn has_kernel2(&self) -> bool {
        true
    }
    fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        let dens = self.lagrangian.density.as_ref();
        let k = discrete::hessian(dens, &phi.lattice, &phi.values, None)?;
        let mut out = k.apply(&self.direction(phi));
        if let VariationFamily::Scaled(alpha) = &self.family {
            let e = discrete::gradient(dens, &phi.lattice, &phi.values, None);
            for (k, o) in out.iter_mut().enumerate() {
                *o += alpha[k] * e[k];
            }
        }
        Ok(out)
    }
    fn kernel2(&self, phi: &FieldConfig) -> Result<Hessian> {
        let k = discrete::hessian(
            self.lagrangian.density.as_ref(),
            &phi.lattice,
            &phi.values,
            None,
        )?;
        let alpha = match &self.family {
            VariationFamily::Fixed(_) => None,
            VariationFamily::Scaled(a) => Some(a.clone()),
        };
        Ok(Hessian::Map {
            dim: phi.values.len(),
            map: Arc::new(IdealHessian {
                lagrangian: self.lagrangian.clone(),
                phi: phi.clone(),
                x: self.direction(phi),
                alpha,
                k,
            }),
        })
    }
}

/// `F(phi) = <X_phi, E(L)_phi>`, an element of the on-shell ideal.
pub fn onshell_ideal_element(gl: &GeneralizedLagrangian, family: VariationFamily) -> Functional {
    let name = match &family {
        VariationFamily::Fixed(_) => "ideal[fixed]",
        VariationFamily::Scaled(_) => "ideal[scaled]",
    };
    Functional::new(
        IdealElement {
            lagrangian: gl.clone(),
            family,
        },
        FunctionalClass::Local,
        None,
        name,
    )
}
