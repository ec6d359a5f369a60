//! Density reconstruction along the geodesic segment between two sections.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{chart_forward, FieldConfig};
use crate::geometry::DEFAULT_GEODESIC_STEPS;
use crate::observables::Functional;

pub const GAUSS_POINTS: usize = 16;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (1..=m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

/// `theta(x) = int_0^1 F'(gamma(t))(gamma'(t))(x) dt / vol(x)` with
/// `gamma(t) = exp_{phi0}(t X)`, `X = u_{phi0}(phi)`, so that
/// `integrate(theta) = F(phi) - F(phi0)` up to quadrature error.
pub fn reconstruct_density(
    f: &Functional,
    phi0: &FieldConfig,
    phi: &FieldConfig,
) -> Result<Vec<f64>> {
    if !f.has_kernel1() {
        return Err(Error::MissingKernel("kernel1"));
    }
    let x = chart_forward(phi0, phi)?;
    let lat = &phi0.lattice;
    let n = phi0.n();
    let target = &phi0.target;
    let mut theta = vec![0.0; lat.n_sites()];
    for (t, w) in gauss_legendre(GAUSS_POINTS) {
        let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..lat.n_sites())
            .into_par_iter()
            .map(|s| {
                let v: Vec<f64> = x.at(s).iter().map(|c| t * c).collect();
                let (end, vel) =
                    target.exp_map_with_velocity(phi0.value(s), &v, DEFAULT_GEODESIC_STEPS)?;
                Ok((end, vel.into_iter().map(|c| c / t).collect()))
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = pts.iter().flat_map(|p| p.0.iter().copied()).collect();
        let gamma = phi0.with_values(values)?;
        let k1 = f.kernel1(&gamma)?;
        for (s, th) in theta.iter_mut().enumerate() {
            let d: f64 = (0..n).map(|i| k1[s * n + i] * pts[s].1[i]).sum();
            *th += w * d / lat.vol_weight(s);
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(GAUSS_POINTS);
        for deg in 0..31 {
            let v: f64 = q.iter().map(|(x, w)| w * x.powi(deg)).sum();
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
    }
}
