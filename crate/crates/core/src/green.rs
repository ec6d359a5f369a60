//! Retarded, advanced and causal Green operators by explicit time marching.
//!
//! Sources are density-weighted covectors and `G s` solves `K X = s`, where `K`
//! is the second variation of the action. Since `D = -kappa h^# K / vol` this is
//! the same as `D^{-1} (-kappa h^# s / vol)`; for the free scalar a unit source
//! produces the `+1/2` forward cone.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Variation;
use crate::geometry::TargetGeometry;
use crate::lattice::LorentzianLattice;
use crate::variational::{linearize, BlockStencil, LinearizedOperator};

/// Default dense-kernel gate: a 64 x 64 lattice.
pub const DEFAULT_DENSE_LIMIT: usize = 64 * 64;

const NH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreenKind {
    Retarded,
    Advanced,
    Causal,
}

/// Precomputed marching data for one stencil.
#[derive(Debug, Clone)]
struct Marcher {
    stencil: BlockStencil,
    /// Inverses of the `+t` and `-t` coupling blocks per site.
    inv_fwd: Vec<f64>,
    inv_bwd: Vec<f64>,
}

fn invert(b: &[f64], n: usize) -> Option<Vec<f64>> {
    if n == 1 {
        return (b[0] != 0.0).then(|| vec![1.0 / b[0]]);
    }
    let m = DMatrix::from_row_slice(n, n, b);
    let scale = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lu = m.lu();
    let det = lu.determinant();
    if !(det.abs() > 1e-14 * scale.powi(n as i32)) {
        return None;
    }
    let inv = lu.try_inverse()?;
    Some((0..n * n).map(|k| inv[(k / n, k % n)]).collect())
}

impl Marcher {
    fn new(lat: &LorentzianLattice, stencil: BlockStencil) -> Result<Self> {
        let n = stencil.n;
        let ns = stencil.n_sites();
        let mut inv_fwd = vec![0.0; ns * n * n];
        let mut inv_bwd = vec![0.0; ns * n * n];
        for s in 0..ns {
            let it = s / lat.n_x;
            if it + 1 < lat.n_t {
                let inv = invert(stencil.block(s, 1), n)
                    .ok_or(Error::SingularTimeCoupling(lat.point(s)))?;
                inv_fwd[s * n * n..(s + 1) * n * n].copy_from_slice(&inv);
            }
            if it > 0 {
                let inv = invert(stencil.block(s, 2), n)
                    .ok_or(Error::SingularTimeCoupling(lat.point(s)))?;
                inv_bwd[s * n * n..(s + 1) * n * n].copy_from_slice(&inv);
            }
        }
        Ok(Marcher {
            stencil,
            inv_fwd,
            inv_bwd,
        })
    }

    /// Solve the equations of rows `0..n_t-1` (forward) or `1..n_t` (backward)
    /// with zero data on the first (last) row.
    fn march(&self, rhs: &[f64], forward: bool) -> Vec<f64> {
        let st = &self.stencil;
        let (n, n_x, n_t) = (st.n, st.n_x, st.n_t);
        let mut x = vec![0.0; rhs.len()];
        let (skip, inv) = if forward {
            (1, &self.inv_fwd)
        } else {
            (2, &self.inv_bwd)
        };
        let rows: Vec<usize> = if forward {
            (0..n_t - 1).collect()
        } else {
            (1..n_t).rev().collect()
        };
        let mut r = vec![0.0; n];
        for it in rows {
            for ix in 0..n_x {
                let s = it * n_x + ix;
                r.copy_from_slice(&rhs[s * n..(s + 1) * n]);
                for o in (0..5).filter(|&o| o != skip) {
                    if let Some(nb) = st.neighbor(s, o) {
                        let b = st.block(s, o);
                        for i in 0..n {
                            for j in 0..n {
                                r[i] -= b[i * n + j] * x[nb * n + j];
                            }
                        }
                    }
                }
                let target = st.neighbor(s, skip).expect("interior row");
                let bi = &inv[s * n * n..(s + 1) * n * n];
                for i in 0..n {
                    x[target * n + i] = (0..n).map(|j| bi[i * n + j] * r[j]).sum();
                }
            }
        }
        x
    }
}

/// Green operator of a linearized operator, immutable after construction.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    pub kind: GreenKind,
    pub op: Arc<LinearizedOperator>,
    marcher: Arc<Marcher>,
}

/// Check the solver preconditions.
pub fn check_solvable(op: &LinearizedOperator) -> Result<()> {
    if !op.is_normally_hyperbolic(NH_TOL).hyperbolic {
        return Err(Error::NotNormallyHyperbolic);
    }
    if !op.lattice().satisfies_cfl() {
        return Err(Error::UnstableDiscretization);
    }
    Ok(())
}

impl GreenOperator {
    pub fn new(op: Arc<LinearizedOperator>, kind: GreenKind) -> Result<Self> {
        check_solvable(&op)?;
        let marcher = Arc::new(Marcher::new(op.lattice(), op.stencil.clone())?);
        Ok(GreenOperator { kind, op, marcher })
    }

    pub fn with_kind(&self, kind: GreenKind) -> Self {
        GreenOperator {
            kind,
            ..self.clone()
        }
    }

    fn check_len(&self, source: &[f64]) -> Result<()> {
        let expected = self.op.base.values.len();
        if source.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: source.len(),
            });
        }
        Ok(())
    }

    pub fn apply_raw(&self, source: &[f64]) -> Result<Vec<f64>> {
        self.check_len(source)?;
        Ok(match self.kind {
            GreenKind::Retarded => self.marcher.march(source, true),
            GreenKind::Advanced => self.marcher.march(source, false),
            GreenKind::Causal => {
                let (r, a) = rayon::join(
                    || self.marcher.march(source, true),
                    || self.marcher.march(source, false),
                );
                r.iter().zip(&a).map(|(r, a)| r - a).collect()
            }
        })
    }

    pub fn apply(&self, source: &[f64]) -> Result<Variation> {
        let lat = self.op.lattice();
        Ok(Variation::from_vec(
            lat,
            self.op.n(),
            self.apply_raw(source)?,
        ))
    }

    /// Dense kernel `G[(x, i), (y, j)]`, one solve per column.
    pub fn dense_kernel(&self, limit_sites: usize) -> Result<Vec<f64>> {
        let lat = self.op.lattice();
        if lat.n_sites() > limit_sites {
            return Err(Error::DenseTooLarge {
                sites: lat.n_sites(),
                limit: limit_sites,
            });
        }
        let dim = self.op.base.values.len();
        let cols: Vec<Vec<f64>> = (0..dim)
            .into_par_iter()
            .map(|c| {
                let mut e = vec![0.0; dim];
                e[c] = 1.0;
                self.apply_raw(&e).expect("sized source")
            })
            .collect();
        let mut m = vec![0.0; dim * dim];
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                m[r * dim + c] = *v;
            }
        }
        Ok(m)
    }
}

pub fn retarded_solve(op: &LinearizedOperator, source: &[f64]) -> Result<Variation> {
    GreenOperator::new(Arc::new(op.clone()), GreenKind::Retarded)?.apply(source)
}

pub fn advanced_solve(op: &LinearizedOperator, source: &[f64]) -> Result<Variation> {
    GreenOperator::new(Arc::new(op.clone()), GreenKind::Advanced)?.apply(source)
}

pub fn causal_propagator(op: &LinearizedOperator) -> Result<GreenOperator> {
    GreenOperator::new(Arc::new(op.clone()), GreenKind::Causal)
}

/// Solve through `D` itself: `D X = -kappa h^# s / vol`, marching the row-scaled stencil.
pub fn solve_via_fiber_metric(
    op: &LinearizedOperator,
    source: &[f64],
    kind: GreenKind,
) -> Result<Variation> {
    check_solvable(op)?;
    let marcher = Marcher::new(op.lattice(), op.d_stencil())?;
    let rhs = op.to_vector_valued(source);
    let x = match kind {
        GreenKind::Retarded => marcher.march(&rhs, true),
        GreenKind::Advanced => marcher.march(&rhs, false),
        GreenKind::Causal => {
            let (r, a) = (marcher.march(&rhs, true), marcher.march(&rhs, false));
            r.iter().zip(&a).map(|(r, a)| r - a).collect()
        }
    };
    Ok(Variation::from_vec(op.lattice(), op.n(), x))
}

/// Largest relative difference of the density-to-variation Green map computed
/// with two auxiliary fiber metrics.
pub fn h_independence(
    op: &LinearizedOperator,
    h_a: &TargetGeometry,
    h_b: &TargetGeometry,
    source: &[f64],
    kind: GreenKind,
) -> Result<f64> {
    let gl = &op.lagrangian;
    let xa = solve_via_fiber_metric(&linearize(gl, &op.base, h_a)?, source, kind)?;
    let xb = solve_via_fiber_metric(&linearize(gl, &op.base, h_b)?, source, kind)?;
    let scale = xa
        .components
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    Ok(xa
        .components
        .iter()
        .zip(&xb.components)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale)
}

/// Linear map `s -> dG(X) s` at a fixed background and direction.
#[derive(Debug, Clone)]
pub struct PropagatorDerivative {
    pub kind: GreenKind,
    retarded: GreenOperator,
    dk: BlockStencil,
}

impl PropagatorDerivative {
    /// `-G+ dK G+`, `-G- dK G-`, or `-G dK G+ - G- dK G` for the causal kind.
    pub fn apply_raw(&self, source: &[f64]) -> Result<Vec<f64>> {
        let ret = &self.retarded;
        let adv = ret.with_kind(GreenKind::Advanced);
        let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
        Ok(match self.kind {
            GreenKind::Retarded => neg(ret.apply_raw(&self.dk.apply(&ret.apply_raw(source)?))?),
            GreenKind::Advanced => neg(adv.apply_raw(&self.dk.apply(&adv.apply_raw(source)?))?),
            GreenKind::Causal => {
                let caus = ret.with_kind(GreenKind::Causal);
                let a = caus.apply_raw(&self.dk.apply(&ret.apply_raw(source)?))?;
                let b = adv.apply_raw(&self.dk.apply(&caus.apply_raw(source)?))?;
                a.iter().zip(&b).map(|(a, b)| -a - b).collect()
            }
        })
    }

    pub fn apply(&self, source: &[f64]) -> Result<Variation> {
        let op = &self.retarded.op;
        Ok(Variation::from_vec(
            op.lattice(),
            op.n(),
            self.apply_raw(source)?,
        ))
    }

    pub fn stencil_derivative(&self) -> &BlockStencil {
        &self.dk
    }
}

/// Derivative of the Green operator of `kind` at `op.base` along `X`.
pub fn propagator_derivative(
    op: &LinearizedOperator,
    x: &Variation,
    kind: GreenKind,
) -> Result<PropagatorDerivative> {
    let retarded = GreenOperator::new(Arc::new(op.clone()), GreenKind::Retarded)?;
    let dk = op.stencil_derivative(x)?;
    Ok(PropagatorDerivative { kind, retarded, dk })
}
