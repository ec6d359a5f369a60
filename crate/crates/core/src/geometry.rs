//! Riemannian target manifolds given in a single chart.
//!
//! Both built-ins are conformally flat, `h_ij(y) = s(y) delta_ij`; Christoffels and
//! curvature are nevertheless computed from the generic formulas in `h` and its
//! derivatives, so nothing downstream depends on conformal flatness.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GEODESIC_STEPS: usize = 64;
const CHART_LIMIT: f64 = 1.0e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TargetGeometry {
    Flat { dim: usize },
    Sphere2Stereographic,
}

/// Metric and its coordinate derivatives at a point.
/// `dh[(l*n + i)*n + j] = d_l h_ij`, similarly for higher orders.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub n: usize,
    pub h: Vec<f64>,
    pub dh: Vec<f64>,
    pub d2h: Vec<f64>,
    pub d3h: Vec<f64>,
}

impl MetricJet {
    pub fn h(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.n + j]
    }
    pub fn dh(&self, l: usize, i: usize, j: usize) -> f64 {
        self.dh[(l * self.n + i) * self.n + j]
    }
    pub fn d2h(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.d2h[((k * n + l) * n + i) * n + j]
    }
    pub fn d3h(&self, a: usize, k: usize, l: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.d3h[(((a * n + k) * n + l) * n + i) * n + j]
    }
}

impl TargetGeometry {
    pub fn builtin(name: &str, dim: usize) -> Result<Self> {
        match name {
            "flat" => {
                if dim == 0 {
                    return Err(Error::UnknownName("flat(0)".into()));
                }
                Ok(TargetGeometry::Flat { dim })
            }
            "sphere2" | "sphere2_stereographic" => Ok(TargetGeometry::Sphere2Stereographic),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetGeometry::Flat { dim } => *dim,
            TargetGeometry::Sphere2Stereographic => 2,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, TargetGeometry::Flat { .. })
    }

    pub fn name(&self) -> String {
        match self {
            TargetGeometry::Flat { dim } => format!("flat({dim})"),
            TargetGeometry::Sphere2Stereographic => "sphere2_stereographic".into(),
        }
    }

    pub fn in_domain(&self, y: &[f64]) -> bool {
        if y.len() != self.dim() || y.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            TargetGeometry::Flat { .. } => true,
            TargetGeometry::Sphere2Stereographic => {
                y.iter().map(|v| v * v).sum::<f64>() < CHART_LIMIT * CHART_LIMIT
            }
        }
    }

    /// Conformal factor `s` and its derivatives up to third order.
    fn conformal(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.dim();
        match self {
            TargetGeometry::Flat { .. } => {
                (1.0, vec![0.0; n], vec![0.0; n * n], vec![0.0; n * n * n])
            }
            TargetGeometry::Sphere2Stereographic => {
                let u = 1.0 + y[0] * y[0] + y[1] * y[1];
                let s = 4.0 / (u * u);
                let u3 = u * u * u;
                let u4 = u3 * u;
                let u5 = u4 * u;
                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let ds: Vec<f64> = (0..2).map(|a| -16.0 * y[a] / u3).collect();
                let mut d2s = vec![0.0; 4];
                let mut d3s = vec![0.0; 8];
                for a in 0..2 {
                    for b in 0..2 {
                        d2s[a * 2 + b] = -16.0 * d(a, b) / u3 + 96.0 * y[a] * y[b] / u4;
                        for c in 0..2 {
                            d3s[(a * 2 + b) * 2 + c] =
                                96.0 * (d(a, b) * y[c] + d(a, c) * y[b] + d(b, c) * y[a]) / u4
                                    - 768.0 * y[a] * y[b] * y[c] / u5;
                        }
                    }
                }
                (s, ds, d2s, d3s)
            }
        }
    }

    pub fn metric_jet(&self, y: &[f64]) -> MetricJet {
        let n = self.dim();
        let (s, ds, d2s, d3s) = self.conformal(y);
        let mut h = vec![0.0; n * n];
        let mut dh = vec![0.0; n * n * n];
        let mut d2h = vec![0.0; n * n * n * n];
        let mut d3h = vec![0.0; n * n * n * n * n];
        for i in 0..n {
            h[i * n + i] = s;
            for l in 0..n {
                dh[(l * n + i) * n + i] = ds[l];
                for k in 0..n {
                    d2h[((k * n + l) * n + i) * n + i] = d2s[k * n + l];
                    for a in 0..n {
                        d3h[(((a * n + k) * n + l) * n + i) * n + i] = d3s[(a * n + k) * n + l];
                    }
                }
            }
        }
        MetricJet { n, h, dh, d2h, d3h }
    }

    pub fn metric(&self, y: &[f64]) -> Vec<f64> {
        self.metric_jet(y).h
    }

    pub fn metric_inverse(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let h = DMatrix::from_row_slice(n, n, &self.metric(y));
        let inv = h.try_inverse().expect("metric is positive definite");
        inv.transpose().as_slice().to_vec()
    }

    /// `gamma[(i*n + j)*n + k] = {h}^i_jk`.
    pub fn christoffel(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        if self.is_flat() {
            return vec![0.0; n * n * n];
        }
        let mj = self.metric_jet(y);
        let hinv = self.metric_inverse(y);
        christoffel_from_jet(&mj, &hinv)
    }

    /// `riem[((k*n + i)*n + l)*n + j] = R^k_ilj
    ///   = d_l G^k_ij - d_j G^k_il + G^k_lm G^m_ij - G^k_jm G^m_il`.
    pub fn riemann(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        if self.is_flat() {
            return vec![0.0; n * n * n * n];
        }
        let mj = self.metric_jet(y);
        let hinv = self.metric_inverse(y);
        let gam = christoffel_from_jet(&mj, &hinv);
        let dgam = christoffel_derivative(&mj, &hinv);
        let g = |i: usize, j: usize, k: usize| gam[(i * n + j) * n + k];
        // dgam[((l*n + k)*n + i)*n + j] = d_l G^k_ij
        let dg = |l: usize, k: usize, i: usize, j: usize| dgam[((l * n + k) * n + i) * n + j];
        let mut r = vec![0.0; n * n * n * n];
        for k in 0..n {
            for i in 0..n {
                for l in 0..n {
                    for j in 0..n {
                        let mut v = dg(l, k, i, j) - dg(j, k, i, l);
                        for m in 0..n {
                            v += g(k, l, m) * g(m, i, j) - g(k, j, m) * g(m, i, l);
                        }
                        r[((k * n + i) * n + l) * n + j] = v;
                    }
                }
            }
        }
        r
    }

    /// Sectional curvature of the coordinate plane (0,1).
    pub fn sectional_curvature(&self, y: &[f64]) -> f64 {
        let n = self.dim();
        assert!(n >= 2);
        let r = self.riemann(y);
        let h = self.metric(y);
        // <R(e0,e1)e1, e0> = h_0k R^k_{1 0 1}
        let num: f64 = (0..n).map(|k| h[k] * r[((k * n + 1) * n) * n + 1]).sum();
        let den = h[0] * h[n + 1] - h[1] * h[n];
        num / den
    }

    pub fn norm(&self, y: &[f64], v: &[f64]) -> f64 {
        let n = self.dim();
        let h = self.metric(y);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += h[i * n + j] * v[i] * v[j];
            }
        }
        s.sqrt()
    }

    fn geodesic_rhs(&self, y: &[f64], v: &[f64], acc: &mut [f64]) {
        let n = self.dim();
        let gam = self.christoffel(y);
        for i in 0..n {
            let mut a = 0.0;
            for j in 0..n {
                for k in 0..n {
                    a -= gam[(i * n + j) * n + k] * v[j] * v[k];
                }
            }
            acc[i] = a;
        }
    }

    /// Geodesic endpoint and final velocity after unit parameter, RK4 with `steps` steps.
    pub fn exp_map_with_velocity(
        &self,
        base: &[f64],
        v: &[f64],
        steps: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        if !self.in_domain(base) {
            return Err(Error::ChartOverflow);
        }
        if self.is_flat() || v.iter().all(|&c| c == 0.0) {
            let y: Vec<f64> = base.iter().zip(v).map(|(a, b)| a + b).collect();
            return Ok((y, v.to_vec()));
        }
        let h = 1.0 / steps.max(1) as f64;
        let mut y = base.to_vec();
        let mut u = v.to_vec();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut yt = vec![0.0; n];
        let mut ut = vec![0.0; n];
        for _ in 0..steps.max(1) {
            self.geodesic_rhs(&y, &u, &mut k1);
            for i in 0..n {
                yt[i] = y[i] + 0.5 * h * u[i];
                ut[i] = u[i] + 0.5 * h * k1[i];
            }
            let u2 = ut.clone();
            self.geodesic_rhs(&yt, &u2, &mut k2);
            for i in 0..n {
                yt[i] = y[i] + 0.5 * h * u2[i];
                ut[i] = u[i] + 0.5 * h * k2[i];
            }
            let u3 = ut.clone();
            self.geodesic_rhs(&yt, &u3, &mut k3);
            for i in 0..n {
                yt[i] = y[i] + h * u3[i];
                ut[i] = u[i] + h * k3[i];
            }
            let u4 = ut.clone();
            self.geodesic_rhs(&yt, &u4, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (u[i] + 2.0 * u2[i] + 2.0 * u3[i] + u4[i]);
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if !self.in_domain(&y) {
                return Err(Error::ChartOverflow);
            }
        }
        Ok((y, u))
    }

    pub fn exp_map(&self, base: &[f64], v: &[f64], steps: usize) -> Result<Vec<f64>> {
        Ok(self.exp_map_with_velocity(base, v, steps)?.0)
    }

    /// Damped Newton shooting for `v` with `exp_map(base, v) = target`.
    pub fn exp_inverse(&self, base: &[f64], target: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.exp_inverse_steps(base, target, tol, DEFAULT_GEODESIC_STEPS)
    }

    pub fn exp_inverse_steps(
        &self,
        base: &[f64],
        target: &[f64],
        tol: f64,
        steps: usize,
    ) -> Result<Vec<f64>> {
        let n = self.dim();
        if base == target {
            return Ok(vec![0.0; n]);
        }
        if !self.in_domain(base) || !self.in_domain(target) {
            return Err(Error::OutsideInjectivity);
        }
        if self.is_flat() {
            return Ok(target.iter().zip(base).map(|(t, b)| t - b).collect());
        }
        let resid = |v: &[f64]| -> Option<Vec<f64>> {
            let y = self.exp_map(base, v, steps).ok()?;
            Some(y.iter().zip(target).map(|(a, b)| a - b).collect())
        };
        let norm = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = self
            .closed_form_log(base, target)
            .unwrap_or_else(|| target.iter().zip(base).map(|(t, b)| t - b).collect());
        let mut r = resid(&v).ok_or(Error::OutsideInjectivity)?;
        for _ in 0..60 {
            let rn = norm(&r);
            if rn < tol {
                return Ok(v);
            }
            let mut jac = DMatrix::<f64>::zeros(n, n);
            let scale = 1.0 + norm(&v);
            for j in 0..n {
                let eps = 1e-6 * scale;
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[j] += eps;
                vm[j] -= eps;
                let rp = resid(&vp).ok_or(Error::OutsideInjectivity)?;
                let rm = resid(&vm).ok_or(Error::OutsideInjectivity)?;
                for i in 0..n {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * eps);
                }
            }
            let step = jac
                .lu()
                .solve(&DVector::from_iterator(n, r.iter().map(|x| -x)))
                .ok_or(Error::OutsideInjectivity)?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand: Vec<f64> = v
                    .iter()
                    .zip(step.iter())
                    .map(|(a, d)| a + alpha * d)
                    .collect();
                if let Some(rc) = resid(&cand) {
                    if norm(&rc) < rn {
                        v = cand;
                        r = rc;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm(&r) < tol {
            Ok(v)
        } else {
            Err(Error::OutsideInjectivity)
        }
    }

    /// Largest geodesic distance from the chart origin at which `exp_inverse` still converges.
    /// Exact inverse exponential where one is known, used to seed the shooting.
    fn closed_form_log(&self, base: &[f64], target: &[f64]) -> Option<Vec<f64>> {
        match self {
            TargetGeometry::Flat { .. } => None,
            TargetGeometry::Sphere2Stereographic => {
                let lift = |y: &[f64]| {
                    let u = 1.0 + y[0] * y[0] + y[1] * y[1];
                    [2.0 * y[0] / u, 2.0 * y[1] / u, 1.0 - 2.0 / u]
                };
                let (p, q) = (lift(base), lift(target));
                let c: f64 = (0..3).map(|i| p[i] * q[i]).sum();
                let w: Vec<f64> = (0..3).map(|i| q[i] - c * p[i]).collect();
                let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if wn == 0.0 || c < -0.99 {
                    return None;
                }
                let theta = wn.atan2(c);
                // Pull the ambient tangent vector back through d(lift), which is conformal.
                let u = 1.0 + base[0] * base[0] + base[1] * base[1];
                let s = 4.0 / (u * u);
                let v = (0..2)
                    .map(|a| {
                        let col = [
                            2.0 * if a == 0 { 1.0 } else { 0.0 } / u
                                - 4.0 * base[a] * base[0] / (u * u),
                            2.0 * if a == 1 { 1.0 } else { 0.0 } / u
                                - 4.0 * base[a] * base[1] / (u * u),
                            4.0 * base[a] / (u * u),
                        ];
                        (0..3).map(|i| col[i] * w[i]).sum::<f64>() * theta / (wn * s)
                    })
                    .collect();
                Some(v)
            }
        }
    }

    pub fn observed_newton_radius(&self) -> f64 {
        static SPHERE: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
        match self {
            TargetGeometry::Flat { .. } => f64::INFINITY,
            TargetGeometry::Sphere2Stereographic => {
                *SPHERE.get_or_init(|| self.probe_newton_radius())
            }
        }
    }

    /// Largest geodesic distance from the chart origin, in steps of 1/4, at which
    /// shooting recovers the initial velocity.
    fn probe_newton_radius(&self) -> f64 {
        let n = self.dim();
        let base = vec![0.0; n];
        let h0 = self.metric(&base)[0].sqrt();
        let mut best = 0.0;
        let mut d = 0.25;
        while d < 4.0 {
            let mut v = vec![0.0; n];
            v[0] = d / h0;
            let ok = self
                .exp_map(&base, &v, DEFAULT_GEODESIC_STEPS)
                .and_then(|t| self.exp_inverse(&base, &t, 1e-10))
                .map(|w| (self.norm(&base, &w) - d).abs() < 1e-6)
                .unwrap_or(false);
            if !ok {
                break;
            }
            best = d;
            d += 0.25;
        }
        best
    }
}

fn christoffel_from_jet(mj: &MetricJet, hinv: &[f64]) -> Vec<f64> {
    let n = mj.n;
    let mut gam = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = 0.0;
                for l in 0..n {
                    v += hinv[i * n + l] * (mj.dh(j, l, k) + mj.dh(k, l, j) - mj.dh(l, j, k));
                }
                gam[(i * n + j) * n + k] = 0.5 * v;
            }
        }
    }
    gam
}

/// `out[((l*n + k)*n + i)*n + j] = d_l {h}^k_ij`.
fn christoffel_derivative(mj: &MetricJet, hinv: &[f64]) -> Vec<f64> {
    let n = mj.n;
    let mut out = vec![0.0; n * n * n * n];
    for l in 0..n {
        // d_l h^{km} = -h^{ka} d_l h_ab h^{bm}
        let mut dinv = vec![0.0; n * n];
        for k in 0..n {
            for m in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        v -= hinv[k * n + a] * mj.dh(l, a, b) * hinv[b * n + m];
                    }
                }
                dinv[k * n + m] = v;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = 0.0;
                    for m in 0..n {
                        let first = mj.dh(i, m, j) + mj.dh(j, m, i) - mj.dh(m, i, j);
                        let second = mj.d2h(l, i, m, j) + mj.d2h(l, j, m, i) - mj.d2h(l, m, i, j);
                        v += dinv[k * n + m] * first + hinv[k * n + m] * second;
                    }
                    out[((l * n + k) * n + i) * n + j] = 0.5 * v;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_is_trivial() {
        let t = TargetGeometry::builtin("flat", 1).unwrap();
        assert_eq!(t.metric(&[0.3]), vec![1.0]);
        assert_eq!(t.christoffel(&[0.3]), vec![0.0]);
        assert_eq!(t.exp_map(&[0.5], &[0.25], 64).unwrap(), vec![0.75]);
        assert_eq!(t.exp_inverse(&[0.5], &[0.75], 1e-12).unwrap(), vec![0.25]);
    }

    #[test]
    fn unknown_target() {
        assert!(matches!(
            TargetGeometry::builtin("torus", 2),
            Err(Error::UnknownName(_))
        ));
    }

    #[test]
    fn sphere_origin_values() {
        let t = TargetGeometry::Sphere2Stereographic;
        assert_eq!(t.metric(&[0.0, 0.0]), vec![4.0, 0.0, 0.0, 4.0]);
        assert!(t.christoffel(&[0.0, 0.0]).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_vector_fixes_base() {
        let t = TargetGeometry::Sphere2Stereographic;
        assert_eq!(
            t.exp_map(&[0.2, -0.1], &[0.0, 0.0], 64).unwrap(),
            vec![0.2, -0.1]
        );
        assert_eq!(
            t.exp_inverse(&[0.2, -0.1], &[0.2, -0.1], 1e-12).unwrap(),
            vec![0.0, 0.0]
        );
    }
}
