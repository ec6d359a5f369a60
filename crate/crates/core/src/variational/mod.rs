//! Generalized Lagrangians, Euler-Lagrange kernels and linearized operators.

pub mod density;
pub mod discrete;
mod reconstruct;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use density::{
    ConstantDensity, Density, DensityRef, DiscreteDivergence, JetCtx, JetDerivs, MassBump,
    ScalarQuadratic, SumDensity, WaveMapDensity,
};
pub use discrete::BlockStencil;
pub use reconstruct::{reconstruct_density, GAUSS_POINTS};

use crate::error::{Error, Result};
use crate::field::{chart_backward, FieldConfig, Variation};
use crate::geometry::TargetGeometry;
use crate::lattice::LorentzianLattice;

/// A density together with the normalization `kappa` of its linearized operator,
/// `D = -kappa h^# K / vol`, so that `sigma_2(D) = kappa h^{-1} m`.
#[derive(Debug, Clone)]
pub struct GeneralizedLagrangian {
    pub density: DensityRef,
    pub normalization: f64,
}

impl GeneralizedLagrangian {
    pub fn new(density: DensityRef) -> Self {
        GeneralizedLagrangian {
            density,
            normalization: 1.0,
        }
    }

    pub fn with_normalization(mut self, kappa: f64) -> Self {
        self.normalization = kappa;
        self
    }

    pub fn free_scalar() -> Self {
        Self::new(Arc::new(ScalarQuadratic::free(1)))
    }

    pub fn kg_mass(m: f64) -> Self {
        Self::new(Arc::new(ScalarQuadratic::kg(1, m)))
    }

    /// Wave maps carry the normalization `1/2` of their displayed principal symbol.
    pub fn wave_map(target: TargetGeometry) -> Self {
        Self::new(Arc::new(WaveMapDensity { target })).with_normalization(0.5)
    }

    /// `"free_scalar"`, `"wave_map"` or `"kg_mass(m)"`.
    pub fn builtin(name: &str, target: &TargetGeometry) -> Result<Self> {
        let name = name.trim();
        let gl = if name == "free_scalar" {
            Self::free_scalar()
        } else if name == "wave_map" {
            Self::wave_map(target.clone())
        } else if let Some(arg) = name
            .strip_prefix("kg_mass(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let m: f64 = arg
                .trim()
                .parse()
                .map_err(|_| Error::UnknownName(name.to_string()))?;
            Self::kg_mass(m)
        } else {
            return Err(Error::UnknownName(name.to_string()));
        };
        if gl.ncomp() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: gl.ncomp(),
                got: target.dim(),
            });
        }
        Ok(gl)
    }

    /// Pointwise sum of densities; keeps the normalization of `self`.
    pub fn plus(&self, other: DensityRef) -> Self {
        GeneralizedLagrangian {
            density: Arc::new(SumDensity {
                parts: vec![self.density.clone(), other],
            }),
            normalization: self.normalization,
        }
    }

    pub fn ncomp(&self) -> usize {
        self.density.ncomp()
    }

    pub fn name(&self) -> String {
        self.density.name()
    }

    fn check(&self, phi: &FieldConfig) -> Result<()> {
        if phi.n() != self.ncomp() {
            return Err(Error::DimensionMismatch {
                expected: self.ncomp(),
                got: phi.n(),
            });
        }
        Ok(())
    }
}

/// Integrated action `sum_x vol f lambda(j^1 phi)`.
pub fn evaluate_action(gl: &GeneralizedLagrangian, f: &[f64], phi: &FieldConfig) -> Result<f64> {
    gl.check(phi)?;
    let ns = phi.lattice.n_sites();
    if f.len() != ns {
        return Err(Error::DimensionMismatch {
            expected: ns,
            got: f.len(),
        });
    }
    Ok(discrete::action(
        gl.density.as_ref(),
        &phi.lattice,
        &phi.values,
        Some(f),
    ))
}

/// Euler-Lagrange kernel at cutoff `f = 1`, stored with density weight.
#[derive(Debug, Clone)]
pub struct ELKernel {
    pub base: FieldConfig,
    pub components: Vec<f64>,
    /// Time rows where the finite window truncates summation by parts.
    pub boundary_rows: Vec<usize>,
}

impl ELKernel {
    /// `E_i(x)` without the volume factor.
    pub fn value(&self, s: usize) -> Vec<f64> {
        let n = self.base.n();
        let v = self.base.lattice.vol_weight(s);
        self.components[s * n..(s + 1) * n]
            .iter()
            .map(|c| c / v)
            .collect()
    }

    pub fn pair(&self, x: &Variation) -> f64 {
        x.pair(&self.components)
    }

    pub fn is_boundary_row(&self, it: usize) -> bool {
        self.boundary_rows.contains(&it)
    }

    /// Largest `|E_i(x)|` over rows not flagged as boundary-contaminated.
    pub fn interior_max_abs(&self) -> f64 {
        let lat = &self.base.lattice;
        (0..lat.n_sites())
            .filter(|&s| !self.is_boundary_row(lat.point(s).it))
            .flat_map(|s| self.value(s))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn boundary_rows(n_t: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = [0, 1, n_t.saturating_sub(2), n_t - 1]
        .into_iter()
        .filter(|&r| r < n_t)
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

pub fn el_kernel(gl: &GeneralizedLagrangian, phi: &FieldConfig) -> Result<ELKernel> {
    gl.check(phi)?;
    let components = discrete::gradient(gl.density.as_ref(), &phi.lattice, &phi.values, None);
    Ok(ELKernel {
        base: phi.clone(),
        components,
        boundary_rows: boundary_rows(phi.lattice.n_t),
    })
}

/// `(analytic, numeric)` directional derivative of the action along `X`.
pub fn directional_derivative_check(
    gl: &GeneralizedLagrangian,
    f: &[f64],
    phi: &FieldConfig,
    x: &Variation,
) -> Result<(f64, f64)> {
    gl.check(phi)?;
    let lat = &phi.lattice;
    let near = x.support(lat).dilate(1);
    if near.points().iter().any(|p| f[lat.site(*p)] != 1.0) {
        return Err(Error::CutoffTooSmall);
    }
    if x.is_zero() {
        return Ok((0.0, 0.0));
    }
    let analytic = el_kernel(gl, phi)?.pair(x);
    let scale = x.components.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let h = 1e-3 / scale.max(1.0);
    let s = |t: f64| -> Result<f64> { evaluate_action(gl, f, &chart_backward(phi, &x.scaled(t))?) };
    let numeric = (8.0 * (s(h)? - s(-h)?) - (s(2.0 * h)? - s(-2.0 * h)?)) / (12.0 * h);
    Ok((analytic, numeric))
}

/// Result of the normal-hyperbolicity test.
#[derive(Debug, Clone, Serialize)]
pub struct NhReport {
    pub hyperbolic: bool,
    /// Per-site factor `c(x)` with `sigma_2 = c g^{-1} (x) id`; NaN where not of that form.
    pub factors: Vec<f64>,
    pub c_min: f64,
    pub c_max: f64,
}

impl NhReport {
    /// The common factor when it is uniform to `tol`.
    pub fn factor(&self, tol: f64) -> Option<f64> {
        (self.hyperbolic && self.c_max - self.c_min <= tol * self.c_max.abs().max(1.0))
            .then_some(self.c_min)
    }
}

/// The linearized operator `D_phi` together with its stored coefficients.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub base: FieldConfig,
    pub lagrangian: GeneralizedLagrangian,
    pub h_fiber: TargetGeometry,
    /// Second variation of the action (density-weighted).
    pub stencil: BlockStencil,
    /// Per site `[tt, tx, xx]` blocks of `sigma_2^{mu nu i}_j`.
    pub symbol: Vec<[Vec<f64>; 3]>,
    /// Per site `h^{ij}(phi(x))`.
    pub hsharp: Vec<f64>,
}

pub fn linearize(
    gl: &GeneralizedLagrangian,
    phi: &FieldConfig,
    h_fiber: &TargetGeometry,
) -> Result<LinearizedOperator> {
    gl.check(phi)?;
    if h_fiber.dim() != phi.n() {
        return Err(Error::DimensionMismatch {
            expected: phi.n(),
            got: h_fiber.dim(),
        });
    }
    let lat = &phi.lattice;
    let n = phi.n();
    let stencil = discrete::hessian(gl.density.as_ref(), lat, &phi.values, None)?;
    let hsharp: Vec<f64> = (0..lat.n_sites())
        .into_par_iter()
        .flat_map_iter(|s| h_fiber.metric_inverse(phi.value(s)))
        .collect();
    let m = discrete::m_tensor(gl.density.as_ref(), lat, &phi.values);
    let kappa = gl.normalization;
    let symbol = m
        .into_iter()
        .enumerate()
        .map(|(s, blocks)| {
            let hs = &hsharp[s * n * n..(s + 1) * n * n];
            blocks.map(|b| {
                let mut out = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] =
                            kappa * (0..n).map(|k| hs[i * n + k] * b[k * n + j]).sum::<f64>();
                    }
                }
                out
            })
        })
        .collect();
    Ok(LinearizedOperator {
        base: phi.clone(),
        lagrangian: gl.clone(),
        h_fiber: h_fiber.clone(),
        stencil,
        symbol,
        hsharp,
    })
}

impl LinearizedOperator {
    pub fn lattice(&self) -> &LorentzianLattice {
        &self.base.lattice
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Row scaling `-kappa h^# / vol` that turns the density-valued `K X` into `D X`.
    pub fn row_scale(&self, s: usize) -> Vec<f64> {
        let n = self.n();
        let f = -self.lagrangian.normalization / self.lattice().vol_weight(s);
        self.hsharp[s * n * n..(s + 1) * n * n]
            .iter()
            .map(|h| f * h)
            .collect()
    }

    pub fn to_vector_valued(&self, density: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; density.len()];
        out.par_chunks_mut(n).enumerate().for_each(|(s, o)| {
            let r = self.row_scale(s);
            for i in 0..n {
                o[i] = (0..n).map(|j| r[i * n + j] * density[s * n + j]).sum();
            }
        });
        out
    }

    /// `K X`, the density-valued second variation.
    pub fn apply_density(&self, x: &[f64]) -> Vec<f64> {
        self.stencil.apply(x)
    }

    /// `D_phi X`.
    pub fn apply(&self, x: &Variation) -> Variation {
        let y = self.to_vector_valued(&self.apply_density(&x.components));
        Variation {
            components: y,
            ..x.clone()
        }
    }

    /// The operator `D` itself as a stencil (rows scaled by `-kappa h^# / vol`).
    pub fn d_stencil(&self) -> BlockStencil {
        let n = self.n();
        let mut d = self.stencil.clone();
        for s in 0..d.n_sites() {
            let r = self.row_scale(s);
            for o in 0..5 {
                let b = d.block(s, o).to_vec();
                let out = d.block_mut(s, o);
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = (0..n).map(|k| r[i * n + k] * b[k * n + j]).sum();
                    }
                }
            }
        }
        d
    }

    /// `<X, Y>_h = sum_x vol h_ij X^i Y^j`.
    pub fn h_pairing(&self, x: &Variation, y: &Variation) -> f64 {
        let n = self.n();
        let lat = self.lattice();
        (0..lat.n_sites())
            .map(|s| {
                let h = self.h_fiber.metric(self.base.value(s));
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += h[i * n + j] * x.at(s)[i] * y.at(s)[j];
                    }
                }
                lat.vol_weight(s) * acc
            })
            .sum()
    }

    pub fn principal_symbol(&self) -> &[[Vec<f64>; 3]] {
        &self.symbol
    }

    /// Derivative of the density-valued stencil along `X`.
    pub fn stencil_derivative(&self, x: &Variation) -> Result<BlockStencil> {
        discrete::hessian_derivative(
            self.lagrangian.density.as_ref(),
            self.lattice(),
            &self.base.values,
            None,
            &x.components,
        )
    }

    pub fn is_normally_hyperbolic(&self, tol: f64) -> NhReport {
        let n = self.n();
        let lat = self.lattice();
        let factors: Vec<f64> = (0..lat.n_sites())
            .map(|s| {
                let (gtt, gxx) = lat.inv_metric(s);
                let [tt, tx, xx] = &self.symbol[s];
                let c = xx[0] / gxx;
                let bound = tol * c.abs() * gtt.abs().max(gxx.abs());
                let mut err: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let d = if i == j { 1.0 } else { 0.0 };
                        err = err
                            .max((tt[i * n + j] - c * gtt * d).abs())
                            .max((xx[i * n + j] - c * gxx * d).abs())
                            .max(tx[i * n + j].abs());
                    }
                }
                let ok = c > tol && err <= bound;
                if ok {
                    c
                } else {
                    f64::NAN
                }
            })
            .collect();
        let hyperbolic = factors.iter().all(|c| c.is_finite());
        let (c_min, c_max) = if hyperbolic {
            factors
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| {
                    (a.min(c), b.max(c))
                })
        } else {
            (f64::NAN, f64::NAN)
        };
        NhReport {
            hyperbolic,
            factors,
            c_min,
            c_max,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let flat = TargetGeometry::Flat { dim: 1 };
        assert_eq!(
            GeneralizedLagrangian::builtin("free_scalar", &flat)
                .unwrap()
                .name(),
            "free_scalar"
        );
        assert!(GeneralizedLagrangian::builtin("kg_mass(0.5)", &flat).is_ok());
        assert!(matches!(
            GeneralizedLagrangian::builtin("bogus", &flat),
            Err(Error::UnknownName(_))
        ));
        assert!(GeneralizedLagrangian::builtin(
            "free_scalar",
            &TargetGeometry::Sphere2Stereographic
        )
        .is_err());
    }

    #[test]
    fn boundary_row_flags() {
        assert_eq!(boundary_rows(10), vec![0, 1, 8, 9]);
        assert_eq!(boundary_rows(3), vec![0, 1, 2]);
    }
}
