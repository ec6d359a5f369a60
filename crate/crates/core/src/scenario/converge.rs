//! Convergence studies under halving of the lattice spacing.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixtures;
use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::green::{GreenKind, GreenOperator};
use crate::lattice::{LorentzianLattice, SitePoint};
use crate::observables::{Functional, PointPolynomial};
use crate::peierls::{jacobi_report, PeierlsContext};
use crate::variational::{el_kernel, linearize, ELKernel, GeneralizedLagrangian};
use crate::wavemaps::{bump_weights, geodesic_background, preset_lattice, wavy_background};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Free-scalar retarded kernel against `1/2 theta(cone)`.
    RetardedKernel,
    /// Interior EL residual of a free-scalar plane wave.
    PlaneWaveResidual,
    /// Interior EL residual of a geodesic wave map on the sphere.
    GeodesicResidual,
    /// EL residual of a constant map (exactly zero).
    ConstantResidual,
    /// Jacobi residual for cubic functionals on a sphere background.
    Jacobi,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::RetardedKernel => "retarded_kernel",
            Quantity::PlaneWaveResidual => "plane_wave_residual",
            Quantity::GeodesicResidual => "geodesic_residual",
            Quantity::ConstantResidual => "constant_residual",
            Quantity::Jacobi => "jacobi",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub resolution: usize,
    pub error: f64,
    /// `log2(e_prev / e)`; `None` on the first row or when both errors are zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Secondary measure (pointwise kernel error, bracket value for Jacobi).
    pub auxiliary: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub quantity: Quantity,
    pub rows: Vec<ConvergenceRow>,
    /// All errors are exactly zero.
    pub exact: bool,
}

impl ConvergenceTable {
    pub fn last_rate(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rate)
    }

    pub fn min_rate(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.rate).reduce(f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("resolution,error,rate,auxiliary\n");
        for r in &self.rows {
            let rate = match (r.rate, self.exact) {
                (_, true) => "exact".to_string(),
                (Some(v), _) => format!("{v:.6}"),
                (None, _) => String::new(),
            };
            out.push_str(&format!(
                "{},{:.12e},{},{:.12e}\n",
                r.resolution, r.error, rate, r.auxiliary
            ));
        }
        out
    }
}

pub fn rate(prev: f64, cur: f64) -> Option<f64> {
    if prev > 0.0 && cur > 0.0 {
        Some((prev / cur).log2())
    } else {
        None
    }
}

/// Resolutions must double at every step.
pub fn check_nested(resolutions: &[usize]) -> Result<()> {
    if resolutions.len() < 2 {
        return Err(Error::config(
            "run.resolutions",
            "need at least two resolutions",
        ));
    }
    if resolutions.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::NonNestedResolutions);
    }
    Ok(())
}

/// Errors of the free-scalar retarded kernel from a unit source at `(0, L/2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelError {
    /// Relative L1 error of averages over a fixed 10 x 20 partition of `[0, T] x [0, L)`.
    pub binned: f64,
    /// Relative pointwise L1 error on the cone interior `|x| < t - 0.1`, `t > 0.2`.
    pub pointwise_interior: f64,
}

const BINS_T: usize = 10;
const BINS_X: usize = 20;

/// `n x n` lattice with `L = 2`, `dt = dx / 2`.
pub fn retarded_kernel_error(n: usize) -> Result<KernelError> {
    let lat = fixtures::half_courant(n, n, 2.0)?;
    let phi = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[0.0])?;
    let op = linearize(&GeneralizedLagrangian::free_scalar(), &phi, &phi.target)?;
    let green = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
    let src = lat.site(SitePoint::new(0, n / 2));
    let mut e = vec![0.0; lat.n_sites()];
    e[src] = 1.0;
    let g = green.apply_raw(&e)?;
    let big_t = fixtures::duration(&lat);
    let x0 = (n / 2) as f64 * lat.dx;
    let mut bins_h = vec![0.0; BINS_T * BINS_X];
    let mut bins_c = vec![0.0; BINS_T * BINS_X];
    let (mut pw, mut pw_norm) = (0.0, 0.0);
    for (s, gs) in g.iter().enumerate() {
        let p = lat.point(s);
        let t = p.it as f64 * lat.dt;
        let x = p.ix as f64 * lat.dx - x0;
        let c = if x.abs() < t {
            0.5
        } else if x.abs() == t {
            0.25
        } else {
            0.0
        };
        let bt = ((t / big_t * BINS_T as f64) as usize).min(BINS_T - 1);
        let bx = (((x + 1.0) / 2.0 * BINS_X as f64) as usize).min(BINS_X - 1);
        bins_h[bt * BINS_X + bx] += gs;
        bins_c[bt * BINS_X + bx] += c;
        if t > 0.2 && x.abs() < t - 0.1 {
            pw += (gs - c).abs();
            pw_norm += c;
        }
    }
    let num: f64 = bins_h.iter().zip(&bins_c).map(|(h, c)| (h - c).abs()).sum();
    let den: f64 = bins_c.iter().sum();
    Ok(KernelError {
        binned: num / den,
        pointwise_interior: pw / pw_norm,
    })
}

/// Largest interior `|E| / vol`.
pub fn interior_residual(e: &ELKernel, lat: &LorentzianLattice) -> f64 {
    let n = e.base.n();
    (0..lat.n_sites())
        .filter(|&s| !e.is_boundary_row(s / lat.n_x))
        .flat_map(|s| (0..n).map(move |i| (s, i)))
        .fold(0.0f64, |m, (s, i)| {
            m.max(e.components[s * n + i].abs() / lat.vol_weight(s))
        })
}

/// `n_x = n` across `L = 2`, `dt = dx / 2`, `T = 1`.
fn unit_lattice(n: usize) -> Result<Arc<LorentzianLattice>> {
    let dx = 2.0 / n as f64;
    let n_t = (1.0 / (0.5 * dx)).round() as usize + 1;
    Ok(Arc::new(LorentzianLattice::minkowski(
        n_t,
        n,
        0.5 * dx,
        dx,
    )?))
}

pub fn plane_wave_residual(n: usize) -> Result<f64> {
    let lat = unit_lattice(n)?;
    let phi = fixtures::plane_wave(lat.clone(), 1.0, 1)?;
    Ok(interior_residual(
        &el_kernel(&GeneralizedLagrangian::free_scalar(), &phi)?,
        &lat,
    ))
}

/// Geodesic `t -> exp_p(t v)` on the sphere, constant in `x`.
pub fn geodesic_residual(n: usize) -> Result<f64> {
    let lat = unit_lattice(n)?;
    let phi = geodesic_background(lat.clone(), &[0.1, -0.05], &[0.3, 0.2])?;
    let gl = GeneralizedLagrangian::wave_map(crate::geometry::TargetGeometry::Sphere2Stereographic);
    Ok(interior_residual(&el_kernel(&gl, &phi)?, &lat))
}

pub fn constant_residual(n: usize) -> Result<f64> {
    let lat = unit_lattice(n)?;
    let phi = FieldConfig::constant(lat.clone(), fixtures::sphere(), &[0.2, -0.1])?;
    let gl = GeneralizedLagrangian::wave_map(crate::geometry::TargetGeometry::Sphere2Stereographic);
    let e = el_kernel(&gl, &phi)?;
    Ok(e.components.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Cubic point functionals used by the wave-map Jacobi study.
pub fn jacobi_functionals(lat: &LorentzianLattice) -> [Functional; 3] {
    [
        PointPolynomial::polynomial(
            lat,
            2,
            bump_weights(lat, 2, 0.7, 1.0, 0.2, &[30.0, 10.0]),
            [1.0, 0.5, 0.3],
        ),
        PointPolynomial::polynomial(
            lat,
            2,
            bump_weights(lat, 2, 0.4, 1.1, 0.2, &[-10.0, 30.0]),
            [1.0, 0.2, 0.5],
        ),
        PointPolynomial::polynomial(
            lat,
            2,
            bump_weights(lat, 2, 0.55, 0.9, 0.2, &[20.0, 20.0]),
            [0.5, 1.0, 0.2],
        ),
    ]
}

/// Jacobi residual and `{F, G}` for the cubic functionals on a sphere background
/// with `n_x = n` (`L = 2`, `T = 1`).
pub fn jacobi_at(n: usize) -> Result<(f64, f64)> {
    let lat = preset_lattice(n, 0)?;
    let phi = wavy_background(
        lat.clone(),
        crate::geometry::TargetGeometry::Sphere2Stereographic,
    )?;
    let gl = GeneralizedLagrangian::wave_map(crate::geometry::TargetGeometry::Sphere2Stereographic);
    let [f, g, h] = jacobi_functionals(&lat);
    let rep = jacobi_report(&gl, &f, &g, &h, &phi)?;
    let bracket = PeierlsContext::new(&gl, &phi)?.bracket(&f, &g)?;
    Ok((rep.residual, bracket))
}

pub fn run(quantity: Quantity, resolutions: &[usize]) -> Result<ConvergenceTable> {
    check_nested(resolutions)?;
    let values: Vec<(f64, f64)> = resolutions
        .par_iter()
        .map(|&n| -> Result<(f64, f64)> {
            match quantity {
                Quantity::RetardedKernel => {
                    let e = retarded_kernel_error(n)?;
                    Ok((e.binned, e.pointwise_interior))
                }
                Quantity::PlaneWaveResidual => Ok((plane_wave_residual(n)?, 0.0)),
                Quantity::GeodesicResidual => Ok((geodesic_residual(n)?, 0.0)),
                Quantity::ConstantResidual => Ok((constant_residual(n)?, 0.0)),
                Quantity::Jacobi => jacobi_at(n),
            }
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (k, (&n, &(error, auxiliary))) in resolutions.iter().zip(&values).enumerate() {
        let r = if k == 0 {
            None
        } else {
            rate(values[k - 1].0, error)
        };
        rows.push(ConvergenceRow {
            resolution: n,
            error,
            rate: r,
            auxiliary,
        });
    }
    let exact = values.iter().all(|(e, _)| *e == 0.0);
    Ok(ConvergenceTable {
        quantity,
        rows,
        exact,
    })
}
