//! Discrete action and its derivatives.
//!
//! The jet at a site is built from one-sided differences; every site term is
//! averaged over the available `(sigma_t, sigma_x)` directions. This keeps the
//! second variation on a compact five-point stencil.

use rayon::prelude::*;

use super::density::{Density, JetCtx, JetDerivs};
use crate::error::{Error, Result};
use crate::lattice::LorentzianLattice;

/// Stencil offsets `(dt, dx)` in site units.
pub const OFFSETS: [(isize, isize); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

pub fn opposite(o: usize) -> usize {
    [0, 2, 1, 4, 3][o]
}

fn t_offset(sigma: f64) -> usize {
    if sigma > 0.0 {
        1
    } else {
        2
    }
}

fn x_offset(sigma: f64) -> usize {
    if sigma > 0.0 {
        3
    } else {
        4
    }
}

/// Block-sparse operator on the five-point stencil, `n x n` blocks per (site, offset).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStencil {
    pub n_t: usize,
    pub n_x: usize,
    pub n: usize,
    pub blocks: Vec<f64>,
}

impl BlockStencil {
    pub fn zeros(lat: &LorentzianLattice, n: usize) -> Self {
        BlockStencil {
            n_t: lat.n_t,
            n_x: lat.n_x,
            n,
            blocks: vec![0.0; lat.n_sites() * 5 * n * n],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_t * self.n_x
    }

    pub fn neighbor(&self, s: usize, o: usize) -> Option<usize> {
        let (it, ix) = (s / self.n_x, s % self.n_x);
        let (dt, dx) = OFFSETS[o];
        let jt = it as isize + dt;
        if jt < 0 || jt >= self.n_t as isize {
            return None;
        }
        let jx = (ix as isize + dx).rem_euclid(self.n_x as isize) as usize;
        Some(jt as usize * self.n_x + jx)
    }

    fn idx(&self, s: usize, o: usize) -> usize {
        (s * 5 + o) * self.n * self.n
    }

    pub fn block(&self, s: usize, o: usize) -> &[f64] {
        let k = self.idx(s, o);
        &self.blocks[k..k + self.n * self.n]
    }

    pub fn block_mut(&mut self, s: usize, o: usize) -> &mut [f64] {
        let k = self.idx(s, o);
        let nn = self.n * self.n;
        &mut self.blocks[k..k + nn]
    }

    /// `y_s = sum_o B(s, o) x_{s+o}`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; x.len()];
        y.par_chunks_mut(n).enumerate().for_each(|(s, ys)| {
            for o in 0..5 {
                if let Some(nb) = self.neighbor(s, o) {
                    let b = self.block(s, o);
                    for i in 0..n {
                        for j in 0..n {
                            ys[i] += b[i * n + j] * x[nb * n + j];
                        }
                    }
                }
            }
        });
        y
    }

    /// Make the operator exactly symmetric: `B(s+o, -o) = B(s, o)^T`.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for s in 0..self.n_sites() {
            for o in 0..5 {
                let Some(nb) = self.neighbor(s, o) else {
                    continue;
                };
                let (a, b) = ((s, o), (nb, opposite(o)));
                if b < a {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        if a == b && j < i {
                            continue;
                        }
                        let ka = self.idx(a.0, a.1) + i * n + j;
                        let kb = self.idx(b.0, b.1) + j * n + i;
                        let m = 0.5 * (self.blocks[ka] + self.blocks[kb]);
                        self.blocks[ka] = m;
                        self.blocks[kb] = m;
                    }
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &BlockStencil, a: f64) {
        for (x, y) in self.blocks.iter_mut().zip(&other.blocks) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense row-major matrix of size `(n_sites n)^2`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let dim = self.n_sites() * n;
        let mut m = vec![0.0; dim * dim];
        for s in 0..self.n_sites() {
            for o in 0..5 {
                if let Some(nb) = self.neighbor(s, o) {
                    let b = self.block(s, o);
                    for i in 0..n {
                        for j in 0..n {
                            m[(s * n + i) * dim + nb * n + j] += b[i * n + j];
                        }
                    }
                }
            }
        }
        m
    }
}

/// Difference directions available at time row `it`, with averaging weights.
pub fn combos(it: usize, n_t: usize) -> Vec<(f64, f64, f64)> {
    let ts: &[f64] = if it == 0 {
        &[1.0]
    } else if it + 1 == n_t {
        &[-1.0]
    } else {
        &[1.0, -1.0]
    };
    let w = 1.0 / (2.0 * ts.len() as f64);
    ts.iter()
        .flat_map(|&st| [(st, 1.0, w), (st, -1.0, w)])
        .collect()
}

/// One site term: the base site `s`, its time neighbor `a`, space neighbor `b`.
#[derive(Debug, Clone, Copy)]
pub struct Term {
    pub s: usize,
    pub a: usize,
    pub b: usize,
    pub sigma_t: f64,
    pub sigma_x: f64,
    /// `sigma_t / dt`, `sigma_x / dx`
    pub ct: f64,
    pub cx: f64,
    /// `vol * cutoff * combo weight`
    pub weight: f64,
}

impl Term {
    /// `coef[u][P]`: d(jet slot u) / d(local site P), `u` in (y, y_t, y_x), `P` in (s, a, b).
    pub fn coef(&self) -> [[f64; 3]; 3] {
        [
            [1.0, 0.0, 0.0],
            [-self.ct, self.ct, 0.0],
            [-self.cx, 0.0, self.cx],
        ]
    }

    pub fn sites(&self) -> [usize; 3] {
        [self.s, self.a, self.b]
    }

    /// Jet-space image of a local triple of vectors.
    pub fn jet_of(&self, x: &[f64], n: usize) -> Vec<f64> {
        let c = self.coef();
        let sites = self.sites();
        let mut z = vec![0.0; 3 * n];
        for u in 0..3 {
            for (p, &site) in sites.iter().enumerate() {
                if c[u][p] != 0.0 {
                    for i in 0..n {
                        z[u * n + i] += c[u][p] * x[site * n + i];
                    }
                }
            }
        }
        z
    }

    /// Stencil slot `(site, offset)` for the local block `(P, Q)`; `None` for the (a, b) pair.
    fn slot(&self, p: usize, q: usize) -> Option<(usize, usize)> {
        let (ot, ox) = (t_offset(self.sigma_t), x_offset(self.sigma_x));
        match (p, q) {
            (0, 0) => Some((self.s, 0)),
            (0, 1) => Some((self.s, ot)),
            (0, 2) => Some((self.s, ox)),
            (1, 0) => Some((self.a, opposite(ot))),
            (1, 1) => Some((self.a, 0)),
            (2, 0) => Some((self.b, opposite(ox))),
            (2, 2) => Some((self.b, 0)),
            _ => None,
        }
    }
}

/// All site terms with unit cutoff, in site order.
pub fn terms(lat: &LorentzianLattice) -> Vec<Term> {
    (0..lat.n_sites())
        .flat_map(|s| {
            let p = lat.point(s);
            let vol = lat.vol_weight(s);
            combos(p.it, lat.n_t)
                .into_iter()
                .map(move |(st, sx, w)| Term {
                    s,
                    a: ((p.it as isize + st as isize) as usize) * lat.n_x + p.ix,
                    b: p.it * lat.n_x + lat.wrap_x(p.ix as isize + sx as isize),
                    sigma_t: st,
                    sigma_x: sx,
                    ct: st / lat.dt,
                    cx: sx / lat.dx,
                    weight: vol * w,
                })
        })
        .collect()
}

/// Evaluate `map` on every site term (parallel over sites, results in site order).
pub fn for_each_term<R, F>(
    dens: &dyn Density,
    lat: &LorentzianLattice,
    values: &[f64],
    cutoff: Option<&[f64]>,
    level: u8,
    map: F,
) -> Vec<R>
where
    R: Send,
    F: Fn(&Term, &JetDerivs) -> R + Sync + Send,
{
    let n = dens.ncomp();
    let per_site: Vec<Vec<R>> = (0..lat.n_sites())
        .into_par_iter()
        .map(|s| {
            let f = cutoff.map_or(1.0, |c| c[s]);
            if f == 0.0 {
                return Vec::new();
            }
            let p = lat.point(s);
            let (gtt, gxx) = lat.inv_metric(s);
            let vol = lat.vol_weight(s);
            let y = &values[s * n..(s + 1) * n];
            combos(p.it, lat.n_t)
                .into_iter()
                .map(|(st, sx, w)| {
                    let a = ((p.it as isize + st as isize) as usize) * lat.n_x + p.ix;
                    let b = p.it * lat.n_x + lat.wrap_x(p.ix as isize + sx as isize);
                    let term = Term {
                        s,
                        a,
                        b,
                        sigma_t: st,
                        sigma_x: sx,
                        ct: st / lat.dt,
                        cx: sx / lat.dx,
                        weight: vol * f * w,
                    };
                    let yt: Vec<f64> = (0..n)
                        .map(|i| term.ct * (values[a * n + i] - y[i]))
                        .collect();
                    let yx: Vec<f64> = (0..n)
                        .map(|i| term.cx * (values[b * n + i] - y[i]))
                        .collect();
                    let ctx = JetCtx {
                        site: s,
                        it: p.it,
                        ix: p.ix,
                        gtt,
                        gxx,
                        sigma_t: st,
                        sigma_x: sx,
                        dt: lat.dt,
                        dx: lat.dx,
                    };
                    let d = dens.derivs(&ctx, y, &yt, &yx, level);
                    map(&term, &d)
                })
                .collect()
        })
        .collect();
    per_site.into_iter().flatten().collect()
}

/// `S_f(phi) = sum_s vol f lambda`.
pub fn action(
    dens: &dyn Density,
    lat: &LorentzianLattice,
    values: &[f64],
    cutoff: Option<&[f64]>,
) -> f64 {
    for_each_term(dens, lat, values, cutoff, 0, |t, d| t.weight * d.value)
        .into_iter()
        .sum()
}

/// Exact gradient of the discrete action (a density-weighted covector).
pub fn gradient(
    dens: &dyn Density,
    lat: &LorentzianLattice,
    values: &[f64],
    cutoff: Option<&[f64]>,
) -> Vec<f64> {
    let n = dens.ncomp();
    let parts = for_each_term(dens, lat, values, cutoff, 1, |t, d| {
        let c = t.coef();
        let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (p, gp) in g.iter_mut().enumerate() {
            for u in 0..3 {
                if c[u][p] != 0.0 {
                    for i in 0..n {
                        gp[i] += t.weight * c[u][p] * d.grad[u * n + i];
                    }
                }
            }
        }
        (t.sites(), g)
    });
    let mut out = vec![0.0; values.len()];
    for (sites, g) in parts {
        for (site, gp) in sites.iter().zip(&g) {
            for i in 0..n {
                out[site * n + i] += gp[i];
            }
        }
    }
    out
}

/// Scatter per-term `(3n)^2` jet-space matrices into a symmetric stencil.
pub fn assemble(
    lat: &LorentzianLattice,
    n: usize,
    parts: Vec<(Term, Vec<f64>)>,
) -> Result<BlockStencil> {
    let mut k = BlockStencil::zeros(lat, n);
    let d = 3 * n;
    for (t, m) in parts {
        let c = t.coef();
        for i in 0..n {
            for j in 0..n {
                if m[(n + i) * d + 2 * n + j] != 0.0 || m[(2 * n + i) * d + n + j] != 0.0 {
                    return Err(Error::MixedJetCoupling);
                }
            }
        }
        for p in 0..3 {
            for q in 0..3 {
                let Some((site, o)) = t.slot(p, q) else {
                    continue;
                };
                let blk = k.block_mut(site, o);
                for u in 0..3 {
                    let cu = c[u][p];
                    if cu == 0.0 {
                        continue;
                    }
                    for v in 0..3 {
                        let cv = c[v][q];
                        if cv == 0.0 {
                            continue;
                        }
                        let f = t.weight * cu * cv;
                        for i in 0..n {
                            for j in 0..n {
                                blk[i * n + j] += f * m[(u * n + i) * d + v * n + j];
                            }
                        }
                    }
                }
            }
        }
    }
    k.symmetrize();
    Ok(k)
}

/// Second variation of the discrete action as a symmetric stencil.
pub fn hessian(
    dens: &dyn Density,
    lat: &LorentzianLattice,
    values: &[f64],
    cutoff: Option<&[f64]>,
) -> Result<BlockStencil> {
    let n = dens.ncomp();
    let parts = for_each_term(dens, lat, values, cutoff, 2, |t, d| (*t, d.hess.clone()));
    assemble(lat, n, parts)
}

/// Derivative of the Hessian stencil in direction `x`.
pub fn hessian_derivative(
    dens: &dyn Density,
    lat: &LorentzianLattice,
    values: &[f64],
    cutoff: Option<&[f64]>,
    x: &[f64],
) -> Result<BlockStencil> {
    let n = dens.ncomp();
    let dd = 3 * n;
    let parts = for_each_term(dens, lat, values, cutoff, 3, |t, d| {
        let xi = t.jet_of(x, n);
        let mut m = vec![0.0; dd * dd];
        for u in 0..dd {
            for v in 0..dd {
                m[u * dd + v] = (0..dd).map(|w| d.t(u, v, w) * xi[w]).sum();
            }
        }
        (*t, m)
    });
    assemble(lat, n, parts)
}

/// Covector `w -> d^3 S(a, b, w)`.
pub fn third_contract(
    dens: &dyn Density,
    lat: &LorentzianLattice,
    values: &[f64],
    cutoff: Option<&[f64]>,
    a: &[f64],
    b: &[f64],
) -> Vec<f64> {
    let n = dens.ncomp();
    let dd = 3 * n;
    let parts = for_each_term(dens, lat, values, cutoff, 3, |t, d| {
        let (za, zb) = (t.jet_of(a, n), t.jet_of(b, n));
        let mut r = vec![0.0; dd];
        for u in 0..dd {
            if za[u] == 0.0 {
                continue;
            }
            for v in 0..dd {
                if zb[v] == 0.0 {
                    continue;
                }
                for w in 0..dd {
                    r[w] += d.t(u, v, w) * za[u] * zb[v];
                }
            }
        }
        let c = t.coef();
        let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (p, gp) in g.iter_mut().enumerate() {
            for u in 0..3 {
                if c[u][p] != 0.0 {
                    for i in 0..n {
                        gp[i] += t.weight * c[u][p] * r[u * n + i];
                    }
                }
            }
        }
        (t.sites(), g)
    });
    let mut out = vec![0.0; a.len()];
    for (sites, g) in parts {
        for (site, gp) in sites.iter().zip(&g) {
            for i in 0..n {
                out[site * n + i] += gp[i];
            }
        }
    }
    out
}

/// Per-site m-tensor `d^2 lambda / d y_mu d y_nu`, averaged over difference directions.
/// Returned as `[tt, tx, xx]` blocks of size `n x n` per site.
pub fn m_tensor(dens: &dyn Density, lat: &LorentzianLattice, values: &[f64]) -> Vec<[Vec<f64>; 3]> {
    let n = dens.ncomp();
    let dd = 3 * n;
    let parts = for_each_term(dens, lat, values, None, 2, |t, d| {
        let w = t.weight / lat.vol_weight(t.s);
        let mut m = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
        for i in 0..n {
            for j in 0..n {
                m[0][i * n + j] = w * d.hess[(n + i) * dd + n + j];
                m[1][i * n + j] = w * d.hess[(n + i) * dd + 2 * n + j];
                m[2][i * n + j] = w * d.hess[(2 * n + i) * dd + 2 * n + j];
            }
        }
        (t.s, m)
    });
    let mut out: Vec<[Vec<f64>; 3]> = (0..lat.n_sites())
        .map(|_| [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]])
        .collect();
    for (s, m) in parts {
        for k in 0..3 {
            for (o, v) in out[s][k].iter_mut().zip(&m[k]) {
                *o += v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TargetGeometry;
    use crate::variational::density::{ScalarQuadratic, WaveMapDensity};

    #[test]
    fn combo_weights_sum_to_one() {
        for it in 0..5 {
            let s: f64 = combos(it, 5).iter().map(|c| c.2).sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let lat = LorentzianLattice::minkowski(5, 6, 0.1, 0.2).unwrap();
        let dens = WaveMapDensity {
            target: TargetGeometry::Sphere2Stereographic,
        };
        let vals: Vec<f64> = (0..lat.n_sites() * 2)
            .map(|k| 0.3 * ((k as f64) * 0.37).sin())
            .collect();
        let k = hessian(&dens, &lat, &vals, None).unwrap();
        let dense = k.to_dense();
        let dim = vals.len();
        let h = 1e-6;
        for col in [0, 7, 23, dim - 1] {
            let mut vp = vals.clone();
            let mut vm = vals.clone();
            vp[col] += h;
            vm[col] -= h;
            let gp = gradient(&dens, &lat, &vp, None);
            let gm = gradient(&dens, &lat, &vm, None);
            for row in 0..dim {
                let fd = (gp[row] - gm[row]) / (2.0 * h);
                assert!((fd - dense[row * dim + col]).abs() < 1e-6, "({row},{col})");
            }
        }
    }

    #[test]
    fn free_scalar_stencil_is_discrete_wave_operator() {
        let lat = LorentzianLattice::minkowski(5, 6, 0.1, 0.2).unwrap();
        let k = hessian(&ScalarQuadratic::free(1), &lat, &vec![0.0; 30], None).unwrap();
        let s = 2 * 6 + 3;
        let vol = lat.vol_weight(s);
        let b = |o| k.block(s, o)[0] / vol;
        assert!((b(1) - 1.0 / 0.01).abs() < 1e-9);
        assert!((b(3) + 1.0 / 0.04).abs() < 1e-9);
        assert!((b(0) - (-2.0 / 0.01 + 2.0 / 0.04)).abs() < 1e-9);
    }
}
