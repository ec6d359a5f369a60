//! First-order Lagrangian densities `lambda(x, y, y_t, y_x)` with analytic partials up to third order.
//!
//! Jet coordinates are ordered `z = (y^0..y^{n-1}, y_t^0.., y_x^0..)`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::geometry::TargetGeometry;

/// Site data a density may depend on. `sigma_t`, `sigma_x` are the one-sided
/// difference directions used for the jet; most densities ignore them.
#[derive(Debug, Clone, Copy)]
pub struct JetCtx {
    pub site: usize,
    pub it: usize,
    pub ix: usize,
    /// `g^tt`
    pub gtt: f64,
    /// `g^xx`
    pub gxx: f64,
    pub sigma_t: f64,
    pub sigma_x: f64,
    pub dt: f64,
    pub dx: f64,
}

/// Value and partial derivatives of a density at one jet point.
#[derive(Debug, Clone)]
pub struct JetDerivs {
    pub dim: usize,
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub third: Vec<f64>,
}

impl JetDerivs {
    pub fn new(n: usize, level: u8) -> Self {
        let d = 3 * n;
        JetDerivs {
            dim: d,
            value: 0.0,
            grad: vec![0.0; d],
            hess: if level >= 2 {
                vec![0.0; d * d]
            } else {
                Vec::new()
            },
            third: if level >= 3 {
                vec![0.0; d * d * d]
            } else {
                Vec::new()
            },
        }
    }

    pub fn h(&self, a: usize, b: usize) -> f64 {
        self.hess[a * self.dim + b]
    }

    pub fn t(&self, a: usize, b: usize, c: usize) -> f64 {
        self.third[(a * self.dim + b) * self.dim + c]
    }

    fn add_h(&mut self, a: usize, b: usize, v: f64) {
        let d = self.dim;
        self.hess[a * d + b] += v;
        if a != b {
            self.hess[b * d + a] += v;
        }
    }

    /// Add `v` to every distinct permutation of `(a, b, c)`.
    fn add_t(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let d = self.dim;
        let mut perms = [
            (a, b, c),
            (a, c, b),
            (b, a, c),
            (b, c, a),
            (c, a, b),
            (c, b, a),
        ];
        perms.sort_unstable();
        let mut last = None;
        for p in perms {
            if Some(p) != last {
                self.third[(p.0 * d + p.1) * d + p.2] += v;
                last = Some(p);
            }
        }
    }

    fn accumulate(&mut self, other: &JetDerivs) {
        self.value += other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in self.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        for (a, b) in self.third.iter_mut().zip(&other.third) {
            *a += b;
        }
    }
}

pub trait Density: Send + Sync + Debug {
    fn ncomp(&self) -> usize;
    /// Jet order: 0 if independent of `y_mu`, else 1.
    fn order(&self) -> u8;
    fn name(&self) -> String;
    /// Partials up to `level` (0 value, 1 gradient, 2 Hessian, 3 third derivatives).
    fn derivs(&self, ctx: &JetCtx, y: &[f64], yt: &[f64], yx: &[f64], level: u8) -> JetDerivs;
}

pub type DensityRef = Arc<dyn Density>;

/// `1/2 sum_i (ct g^tt (y_t^i)^2 + cx g^xx (y_x^i)^2) + 1/2 m2 |y|^2`.
#[derive(Debug, Clone)]
pub struct ScalarQuadratic {
    pub n: usize,
    pub ct: f64,
    pub cx: f64,
    pub m2: f64,
}

impl ScalarQuadratic {
    pub fn free(n: usize) -> Self {
        ScalarQuadratic {
            n,
            ct: 1.0,
            cx: 1.0,
            m2: 0.0,
        }
    }

    pub fn kg(n: usize, mass: f64) -> Self {
        ScalarQuadratic {
            n,
            ct: 1.0,
            cx: 1.0,
            m2: mass * mass,
        }
    }
}

impl Density for ScalarQuadratic {
    fn ncomp(&self) -> usize {
        self.n
    }
    fn order(&self) -> u8 {
        if self.ct == 0.0 && self.cx == 0.0 {
            0
        } else {
            1
        }
    }
    fn name(&self) -> String {
        if self.ct == 1.0 && self.cx == 1.0 {
            if self.m2 == 0.0 {
                "free_scalar".into()
            } else {
                format!("kg_mass({})", self.m2.sqrt())
            }
        } else {
            format!(
                "scalar_quadratic(ct={}, cx={}, m2={})",
                self.ct, self.cx, self.m2
            )
        }
    }
    fn derivs(&self, ctx: &JetCtx, y: &[f64], yt: &[f64], yx: &[f64], level: u8) -> JetDerivs {
        let n = self.n;
        let at = self.ct * ctx.gtt;
        let ax = self.cx * ctx.gxx;
        let mut d = JetDerivs::new(n, level);
        for i in 0..n {
            d.value += 0.5 * (at * yt[i] * yt[i] + ax * yx[i] * yx[i] + self.m2 * y[i] * y[i]);
            d.grad[i] = self.m2 * y[i];
            d.grad[n + i] = at * yt[i];
            d.grad[2 * n + i] = ax * yx[i];
            if level >= 2 {
                d.add_h(i, i, self.m2);
                d.add_h(n + i, n + i, at);
                d.add_h(2 * n + i, 2 * n + i, ax);
            }
        }
        d
    }
}

/// `1/2 g^{mu nu} h_ij(y) y^i_mu y^j_nu` for a diagonal spacetime metric.
#[derive(Debug, Clone)]
pub struct WaveMapDensity {
    pub target: TargetGeometry,
}

impl Density for WaveMapDensity {
    fn ncomp(&self) -> usize {
        self.target.dim()
    }
    fn order(&self) -> u8 {
        1
    }
    fn name(&self) -> String {
        "wave_map".into()
    }
    fn derivs(&self, ctx: &JetCtx, y: &[f64], yt: &[f64], yx: &[f64], level: u8) -> JetDerivs {
        let n = self.target.dim();
        let mj = self.target.metric_jet(y);
        let mut d = JetDerivs::new(n, level);
        let dirs = [(ctx.gtt, yt, n), (ctx.gxx, yx, 2 * n)];
        // P^{ij} = sum_mu g^mumu v_mu^i v_mu^j
        let mut p = vec![0.0; n * n];
        for (g, v, _) in dirs {
            for i in 0..n {
                for j in 0..n {
                    p[i * n + j] += g * v[i] * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                d.value += 0.5 * mj.h(i, j) * p[i * n + j];
            }
        }
        for k in 0..n {
            let mut gy = 0.0;
            for i in 0..n {
                for j in 0..n {
                    gy += 0.5 * mj.dh(k, i, j) * p[i * n + j];
                }
            }
            d.grad[k] = gy;
            for (g, v, off) in dirs {
                d.grad[off + k] = (0..n).map(|j| g * mj.h(k, j) * v[j]).sum();
            }
        }
        if level >= 2 {
            for k in 0..n {
                for l in k..n {
                    let mut v = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            v += 0.5 * mj.d2h(k, l, i, j) * p[i * n + j];
                        }
                    }
                    d.add_h(k, l, v);
                }
                for (g, vel, off) in dirs {
                    for l in 0..n {
                        let v: f64 = (0..n).map(|j| g * mj.dh(l, k, j) * vel[j]).sum();
                        d.add_h(l, off + k, v);
                    }
                    for m in k..n {
                        d.add_h(off + k, off + m, g * mj.h(k, m));
                    }
                }
            }
        }
        if level >= 3 {
            for a in 0..n {
                for k in a..n {
                    for l in k..n {
                        let mut v = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                v += 0.5 * mj.d3h(a, k, l, i, j) * p[i * n + j];
                            }
                        }
                        d.add_t(a, k, l, v);
                    }
                }
            }
            for (g, vel, off) in dirs {
                for a in 0..n {
                    for l in a..n {
                        for k in 0..n {
                            let v: f64 = (0..n).map(|j| g * mj.d2h(a, l, k, j) * vel[j]).sum();
                            d.add_t(a, l, off + k, v);
                        }
                    }
                    for k in 0..n {
                        for m in k..n {
                            d.add_t(a, off + k, off + m, g * mj.dh(a, k, m));
                        }
                    }
                }
            }
        }
        d
    }
}

/// `1/2 m2 w(x) |y|^2` with a per-site window `w`.
#[derive(Debug, Clone)]
pub struct MassBump {
    pub n: usize,
    pub m2: f64,
    pub window: Arc<Vec<f64>>,
}

impl Density for MassBump {
    fn ncomp(&self) -> usize {
        self.n
    }
    fn order(&self) -> u8 {
        0
    }
    fn name(&self) -> String {
        format!("mass_bump({})", self.m2)
    }
    fn derivs(&self, ctx: &JetCtx, y: &[f64], _yt: &[f64], _yx: &[f64], level: u8) -> JetDerivs {
        let c = self.m2 * self.window[ctx.site];
        let mut d = JetDerivs::new(self.n, level);
        for i in 0..self.n {
            d.value += 0.5 * c * y[i] * y[i];
            d.grad[i] = c * y[i];
            if level >= 2 {
                d.add_h(i, i, c);
            }
        }
        d
    }
}

/// Discrete total divergence `D_t V(y) + D_x V(y)` with `V(y) = sum_i a y_i^2/2 + b y_i^3/3`,
/// written so that the difference quotient is exact for the one-sided jet in use.
#[derive(Debug, Clone)]
pub struct DiscreteDivergence {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl DiscreteDivergence {
    fn v(&self, y: f64) -> [f64; 4] {
        [
            0.5 * self.a * y * y + self.b * y * y * y / 3.0,
            self.a * y + self.b * y * y,
            self.a + 2.0 * self.b * y,
            2.0 * self.b,
        ]
    }
}

impl Density for DiscreteDivergence {
    fn ncomp(&self) -> usize {
        self.n
    }
    fn order(&self) -> u8 {
        1
    }
    fn name(&self) -> String {
        "discrete_divergence".into()
    }
    fn derivs(&self, ctx: &JetCtx, y: &[f64], yt: &[f64], yx: &[f64], level: u8) -> JetDerivs {
        let n = self.n;
        let mut d = JetDerivs::new(n, level);
        for (sigma, step, vel, off) in [
            (ctx.sigma_t, ctx.dt, yt, n),
            (ctx.sigma_x, ctx.dx, yx, 2 * n),
        ] {
            for i in 0..n {
                // lambda = sigma (V(w) - V(y)) / step, w = y + sigma step v
                let w = y[i] + sigma * step * vel[i];
                let vw = self.v(w);
                let vy = self.v(y[i]);
                let (yi, vi) = (i, off + i);
                d.value += sigma * (vw[0] - vy[0]) / step;
                d.grad[yi] += sigma * (vw[1] - vy[1]) / step;
                d.grad[vi] += vw[1];
                if level >= 2 {
                    d.add_h(yi, yi, sigma * (vw[2] - vy[2]) / step);
                    d.add_h(yi, vi, vw[2]);
                    d.add_h(vi, vi, sigma * step * vw[2]);
                }
                if level >= 3 {
                    d.add_t(yi, yi, yi, sigma * (vw[3] - vy[3]) / step);
                    d.add_t(yi, yi, vi, vw[3]);
                    d.add_t(yi, vi, vi, sigma * step * vw[3]);
                    d.add_t(vi, vi, vi, step * step * vw[3]);
                }
            }
        }
        d
    }
}

/// Pointwise sum of densities with the same number of components.
#[derive(Debug, Clone)]
pub struct SumDensity {
    pub parts: Vec<DensityRef>,
}

impl Density for SumDensity {
    fn ncomp(&self) -> usize {
        self.parts[0].ncomp()
    }
    fn order(&self) -> u8 {
        self.parts.iter().map(|p| p.order()).max().unwrap_or(0)
    }
    fn name(&self) -> String {
        self.parts
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join(" + ")
    }
    fn derivs(&self, ctx: &JetCtx, y: &[f64], yt: &[f64], yx: &[f64], level: u8) -> JetDerivs {
        let mut d = JetDerivs::new(self.ncomp(), level);
        for p in &self.parts {
            d.accumulate(&p.derivs(ctx, y, yt, yx, level));
        }
        d
    }
}

/// Constant density `c`.
#[derive(Debug, Clone)]
pub struct ConstantDensity {
    pub n: usize,
    pub c: f64,
}

impl Density for ConstantDensity {
    fn ncomp(&self) -> usize {
        self.n
    }
    fn order(&self) -> u8 {
        0
    }
    fn name(&self) -> String {
        format!("constant({})", self.c)
    }
    fn derivs(&self, _ctx: &JetCtx, _y: &[f64], _yt: &[f64], _yx: &[f64], level: u8) -> JetDerivs {
        let mut d = JetDerivs::new(self.n, level);
        d.value = self.c;
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> JetCtx {
        JetCtx {
            site: 0,
            it: 1,
            ix: 1,
            gtt: -1.0,
            gxx: 1.0,
            sigma_t: 1.0,
            sigma_x: -1.0,
            dt: 0.1,
            dx: 0.2,
        }
    }

    /// Compare analytic partials with central differences of the next lower level.
    fn check(dens: &dyn Density, y: &[f64], yt: &[f64], yx: &[f64]) {
        let n = dens.ncomp();
        let c = ctx();
        let d = dens.derivs(&c, y, yt, yx, 3);
        let z0: Vec<f64> = y.iter().chain(yt).chain(yx).copied().collect();
        let at = |z: &[f64]| dens.derivs(&c, &z[..n], &z[n..2 * n], &z[2 * n..], 3);
        let h = 1e-6;
        for w in 0..3 * n {
            let mut zp = z0.clone();
            let mut zm = z0.clone();
            zp[w] += h;
            zm[w] -= h;
            let (dp, dm) = (at(&zp), at(&zm));
            let g = (dp.value - dm.value) / (2.0 * h);
            assert!(
                (g - d.grad[w]).abs() < 1e-6 * (1.0 + g.abs()),
                "grad {w}: {g} vs {}",
                d.grad[w]
            );
            for u in 0..3 * n {
                let fd = (dp.grad[u] - dm.grad[u]) / (2.0 * h);
                assert!(
                    (fd - d.h(u, w)).abs() < 1e-6 * (1.0 + fd.abs()),
                    "hess {u},{w}"
                );
                for v in 0..3 * n {
                    let fd = (dp.h(u, v) - dm.h(u, v)) / (2.0 * h);
                    assert!(
                        (fd - d.t(u, v, w)).abs() < 1e-5 * (1.0 + fd.abs()),
                        "third {u},{v},{w}"
                    );
                }
            }
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        check(
            &ScalarQuadratic::kg(2, 0.7),
            &[0.3, -0.2],
            &[0.1, 0.5],
            &[-0.4, 0.2],
        );
        check(
            &WaveMapDensity {
                target: TargetGeometry::Sphere2Stereographic,
            },
            &[0.3, -0.2],
            &[0.1, 0.5],
            &[-0.4, 0.2],
        );
        check(
            &DiscreteDivergence {
                n: 1,
                a: 0.5,
                b: 1.5,
            },
            &[0.3],
            &[0.7],
            &[-0.2],
        );
    }

    #[test]
    fn wave_map_on_flat_line_is_free_scalar() {
        let c = ctx();
        let wm = WaveMapDensity {
            target: TargetGeometry::Flat { dim: 1 },
        };
        let fs = ScalarQuadratic::free(1);
        let a = wm.derivs(&c, &[0.4], &[0.3], &[-0.1], 2);
        let b = fs.derivs(&c, &[0.4], &[0.3], &[-0.1], 2);
        assert_eq!(a.value, b.value);
        assert_eq!(a.hess, b.hess);
    }
}
