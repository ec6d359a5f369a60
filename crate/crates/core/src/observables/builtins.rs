//! Built-in functionals and smooth composition maps.

use std::fmt::Debug;

use super::{Functional, FunctionalClass, FunctionalImpl, Hessian};
use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::lattice::{LorentzianLattice, SiteSet};
use crate::variational::{discrete, BlockStencil, GeneralizedLagrangian};

fn check_len(phi: &FieldConfig, len: usize) -> Result<()> {
    if phi.values.len() != len {
        return Err(Error::MismatchedLattice);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ConstantFunctional {
    pub c: f64,
}

impl FunctionalImpl for ConstantFunctional {
    fn evaluate(&self, _phi: &FieldConfig) -> Result<f64> {
        Ok(self.c)
    }
    fn has_kernel1(&self) -> bool {
        true
    }
    fn has_kernel2(&self) -> bool {
        true
    }
    fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        Ok(vec![0.0; phi.values.len()])
    }
    fn kernel2(&self, phi: &FieldConfig) -> Result<Hessian> {
        Ok(Hessian::Zero {
            dim: phi.values.len(),
        })
    }
    fn constant_value(&self) -> Option<f64> {
        Some(self.c)
    }
}

/// `F(phi) = sum_x vol(x) sum_i w_i(x) P(phi^i(x))`, `P(y) = c1 y + c2 y^2 + c3 y^3`.
#[derive(Debug, Clone)]
pub struct PointPolynomial {
    pub weights: Vec<f64>,
    pub coeffs: [f64; 3],
}

impl PointPolynomial {
    fn functional(
        weights: Vec<f64>,
        coeffs: [f64; 3],
        lat: &LorentzianLattice,
        n: usize,
        name: &str,
    ) -> Functional {
        let mask = (0..lat.n_sites())
            .map(|s| weights[s * n..(s + 1) * n].iter().any(|&w| w != 0.0))
            .collect();
        let support = SiteSet::from_mask(lat, mask);
        Functional::new(
            PointPolynomial { weights, coeffs },
            FunctionalClass::Microlocal,
            Some(support),
            name,
        )
    }

    /// `int f . phi`
    pub fn linear(lat: &LorentzianLattice, n: usize, weights: Vec<f64>) -> Functional {
        Self::functional(weights, [1.0, 0.0, 0.0], lat, n, "linear")
    }

    /// `int f . phi^2 / 2`
    pub fn quadratic(lat: &LorentzianLattice, n: usize, weights: Vec<f64>) -> Functional {
        Self::functional(weights, [0.0, 0.5, 0.0], lat, n, "quadratic")
    }

    pub fn polynomial(
        lat: &LorentzianLattice,
        n: usize,
        weights: Vec<f64>,
        coeffs: [f64; 3],
    ) -> Functional {
        Self::functional(weights, coeffs, lat, n, "polynomial")
    }

    fn p(&self, y: f64) -> [f64; 3] {
        let [c1, c2, c3] = self.coeffs;
        [
            c1 * y + c2 * y * y + c3 * y * y * y,
            c1 + 2.0 * c2 * y + 3.0 * c3 * y * y,
            2.0 * c2 + 6.0 * c3 * y,
        ]
    }
}

impl FunctionalImpl for PointPolynomial {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        check_len(phi, self.weights.len())?;
        let n = phi.n();
        let lat = &phi.lattice;
        Ok((0..phi.values.len())
            .filter(|&k| self.weights[k] != 0.0)
            .map(|k| lat.vol_weight(k / n) * self.weights[k] * self.p(phi.values[k])[0])
            .sum())
    }
    fn has_kernel1(&self) -> bool {
        true
    }
    fn has_kernel2(&self) -> bool {
        true
    }
    fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        check_len(phi, self.weights.len())?;
        let n = phi.n();
        Ok((0..phi.values.len())
            .map(|k| {
                if self.weights[k] == 0.0 {
                    0.0
                } else {
                    phi.lattice.vol_weight(k / n) * self.weights[k] * self.p(phi.values[k])[1]
                }
            })
            .collect())
    }
    fn kernel2(&self, phi: &FieldConfig) -> Result<Hessian> {
        check_len(phi, self.weights.len())?;
        let n = phi.n();
        let lat = &phi.lattice;
        if self.coeffs[1] == 0.0 && self.coeffs[2] == 0.0 {
            return Ok(Hessian::Zero {
                dim: phi.values.len(),
            });
        }
        let mut st = BlockStencil::zeros(lat, n);
        for s in 0..lat.n_sites() {
            let b = st.block_mut(s, 0);
            for i in 0..n {
                let k = s * n + i;
                if self.weights[k] != 0.0 {
                    b[i * n + i] = lat.vol_weight(s) * self.weights[k] * self.p(phi.values[k])[2];
                }
            }
        }
        Ok(Hessian::Stencil(st))
    }
}

/// Action functional `S_f(phi)` of a generalized Lagrangian with cutoff `f`.
#[derive(Debug, Clone)]
pub struct ActionFunctional {
    pub lagrangian: GeneralizedLagrangian,
    pub cutoff: Vec<f64>,
}

impl ActionFunctional {
    /// Sites whose values enter `S_f`: `supp f` and its stencil neighbours.
    pub fn dependence(lat: &LorentzianLattice, cutoff: &[f64]) -> SiteSet {
        let mut mask = vec![false; lat.n_sites()];
        for s in (0..lat.n_sites()).filter(|&s| cutoff[s] != 0.0) {
            let p = lat.point(s);
            mask[s] = true;
            for (dt, dx) in discrete::OFFSETS {
                let it = p.it as isize + dt;
                if it >= 0 && (it as usize) < lat.n_t {
                    mask[it as usize * lat.n_x + lat.wrap_x(p.ix as isize + dx)] = true;
                }
            }
        }
        SiteSet::from_mask(lat, mask)
    }

    pub fn functional(
        lagrangian: GeneralizedLagrangian,
        lat: &LorentzianLattice,
        cutoff: Vec<f64>,
    ) -> Functional {
        let support = Self::dependence(lat, &cutoff);
        let name = format!("action[{}]", lagrangian.name());
        Functional::new(
            ActionFunctional { lagrangian, cutoff },
            FunctionalClass::Microlocal,
            Some(support),
            name,
        )
    }
}

impl FunctionalImpl for ActionFunctional {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        check_len(phi, self.cutoff.len() * self.lagrangian.ncomp())?;
        Ok(discrete::action(
            self.lagrangian.density.as_ref(),
            &phi.lattice,
            &phi.values,
            Some(&self.cutoff),
        ))
    }
    fn has_kernel1(&self) -> bool {
        true
    }
    fn has_kernel2(&self) -> bool {
        true
    }
    fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        check_len(phi, self.cutoff.len() * self.lagrangian.ncomp())?;
        Ok(discrete::gradient(
            self.lagrangian.density.as_ref(),
            &phi.lattice,
            &phi.values,
            Some(&self.cutoff),
        ))
    }
    fn kernel2(&self, phi: &FieldConfig) -> Result<Hessian> {
        check_len(phi, self.cutoff.len() * self.lagrangian.ncomp())?;
        Ok(Hessian::Stencil(discrete::hessian(
            self.lagrangian.density.as_ref(),
            &phi.lattice,
            &phi.values,
            Some(&self.cutoff),
        )?))
    }
}

/// `1 / (1 + sup_{x in window} |phi(x)|^2)`: evaluation only.
#[derive(Debug, Clone)]
pub struct SupFunctional {
    pub window: Vec<bool>,
}

impl SupFunctional {
    pub fn functional(window: SiteSet) -> Functional {
        let support = window.clone();
        Functional::new(
            SupFunctional {
                window: window.mask().to_vec(),
            },
            FunctionalClass::Generic,
            Some(support),
            "sup",
        )
    }
}

impl FunctionalImpl for SupFunctional {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        check_len(phi, self.window.len() * phi.n())?;
        let sup = (0..self.window.len())
            .filter(|&s| self.window[s])
            .map(|s| phi.value(s).iter().map(|y| y * y).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(1.0 / (1.0 + sup))
    }
}

/// Smooth map `R^n -> R` with first and second derivatives.
pub trait SmoothFn: Send + Sync + Debug {
    fn arity(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn grad(&self, z: &[f64]) -> Vec<f64>;
    /// Row-major `n x n`.
    fn hess(&self, z: &[f64]) -> Vec<f64>;
    fn is_affine(&self) -> bool {
        false
    }
    fn name(&self) -> String;
}

/// `c0 + sum_j c_j z_j`
#[derive(Debug, Clone)]
pub struct Affine {
    pub c0: f64,
    pub coeffs: Vec<f64>,
}

impl SmoothFn for Affine {
    fn arity(&self) -> usize {
        self.coeffs.len()
    }
    fn value(&self, z: &[f64]) -> f64 {
        self.c0 + self.coeffs.iter().zip(z).map(|(c, z)| c * z).sum::<f64>()
    }
    fn grad(&self, _z: &[f64]) -> Vec<f64> {
        self.coeffs.clone()
    }
    fn hess(&self, _z: &[f64]) -> Vec<f64> {
        vec![0.0; self.coeffs.len().pow(2)]
    }
    fn is_affine(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "affine".into()
    }
}

/// `z_1 z_2`
#[derive(Debug, Clone)]
pub struct Product;

impl SmoothFn for Product {
    fn arity(&self) -> usize {
        2
    }
    fn value(&self, z: &[f64]) -> f64 {
        z[0] * z[1]
    }
    fn grad(&self, z: &[f64]) -> Vec<f64> {
        vec![z[1], z[0]]
    }
    fn hess(&self, _z: &[f64]) -> Vec<f64> {
        vec![0.0, 1.0, 1.0, 0.0]
    }
    fn name(&self) -> String {
        "product".into()
    }
}

/// Smooth step: 1 on `|t| <= 1/2`, 0 on `|t| >= 1`, built from `e^{-1/s}`.
#[derive(Debug, Clone, Copy)]
pub struct ChiStep;

/// `e^{-1/s}` and its first two derivatives, zero for `s <= 0`.
fn bump(s: f64) -> [f64; 3] {
    if s <= 0.0 {
        return [0.0; 3];
    }
    let e = (-1.0 / s).exp();
    let s2 = s * s;
    [e, e / s2, e * (1.0 - 2.0 * s) / (s2 * s2)]
}

impl ChiStep {
    /// Value and first two derivatives at `t`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let a = t.abs();
        if a <= 0.5 {
            return [1.0, 0.0, 0.0];
        }
        if a >= 1.0 {
            return [0.0; 3];
        }
        // chi = q(1 - a) / (q(1 - a) + q(a - 1/2))
        let u = bump(1.0 - a);
        let v = bump(a - 0.5);
        let den = u[0] + v[0];
        let val = u[0] / den;
        // derivatives w.r.t. a
        let du = -u[1];
        let dv = v[1];
        let d2u = u[2];
        let d2v = v[2];
        let dden = du + dv;
        let d2den = d2u + d2v;
        let d1 = (du * den - u[0] * dden) / (den * den);
        let d2 = (d2u * den - u[0] * d2den) / (den * den) - 2.0 * dden * d1 / den;
        let sign = t.signum();
        [val, sign * d1, d2]
    }
}

/// `exp(1 - chi(z^2))`
#[derive(Debug, Clone)]
pub struct Exp1MinusChiSq;

impl SmoothFn for Exp1MinusChiSq {
    fn arity(&self) -> usize {
        1
    }
    fn value(&self, z: &[f64]) -> f64 {
        (1.0 - ChiStep.eval(z[0] * z[0])[0]).exp()
    }
    fn grad(&self, z: &[f64]) -> Vec<f64> {
        let c = ChiStep.eval(z[0] * z[0]);
        vec![-(1.0 - c[0]).exp() * c[1] * 2.0 * z[0]]
    }
    fn hess(&self, z: &[f64]) -> Vec<f64> {
        let t = z[0] * z[0];
        let c = ChiStep.eval(t);
        let e = (1.0 - c[0]).exp();
        // d/dz [-e chi'(t) 2z] with dt/dz = 2z
        let dt = 2.0 * z[0];
        vec![e * c[1] * c[1] * dt * dt - e * c[2] * dt * dt - e * c[1] * 2.0]
    }
    fn name(&self) -> String {
        "exp(1-chi(z^2))".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_step_derivatives() {
        let h = 1e-6;
        for t in [0.55, 0.7, 0.8, 0.95, -0.75] {
            let c = ChiStep.eval(t);
            let (p, m) = (ChiStep.eval(t + h), ChiStep.eval(t - h));
            assert!(((p[0] - m[0]) / (2.0 * h) - c[1]).abs() < 1e-6);
            assert!(((p[1] - m[1]) / (2.0 * h) - c[2]).abs() < 1e-5);
        }
        assert_eq!(ChiStep.eval(0.3)[0], 1.0);
        assert_eq!(ChiStep.eval(1.2)[0], 0.0);
    }

    #[test]
    fn regfunc_psi_derivatives() {
        let f = Exp1MinusChiSq;
        let h = 1e-6;
        for z in [0.8, 0.9, -0.85] {
            let g = (f.value(&[z + h]) - f.value(&[z - h])) / (2.0 * h);
            assert!((g - f.grad(&[z])[0]).abs() < 1e-6);
            let hh = (f.grad(&[z + h])[0] - f.grad(&[z - h])[0]) / (2.0 * h);
            assert!((hh - f.hess(&[z])[0]).abs() < 1e-5);
        }
    }
}
