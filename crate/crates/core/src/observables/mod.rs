//! Functionals on configuration space, their derivative kernels and the functional *-algebra.

mod analysis;
mod builtins;

use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use analysis::{
    additivity_test, classify, covariant_hessian, global_additivity_glued, global_additivity_test,
    jump_ratio, probe_support, AdditivityReport, ClassReport, GlobalAdditivityReport,
    JUMP_THRESHOLD,
};
pub use builtins::{
    ActionFunctional, Affine, ChiStep, ConstantFunctional, Exp1MinusChiSq, PointPolynomial,
    Product, SmoothFn, SupFunctional,
};

use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::lattice::SiteSet;
use crate::variational::BlockStencil;

/// Declared functional class, ordered from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalClass {
    Generic,
    Regular,
    Local,
    Microlocal,
}

/// Second derivative of a functional in chart coordinates.
#[derive(Debug, Clone)]
pub enum Hessian {
    Zero {
        dim: usize,
    },
    /// Local: couples each site only to its stencil neighbours.
    Stencil(BlockStencil),
    Dense {
        dim: usize,
        data: Vec<f64>,
    },
    /// `sum_k c_k u_k v_k^T`
    Outer {
        dim: usize,
        terms: Vec<(f64, Vec<f64>, Vec<f64>)>,
    },
    Sum(Vec<(f64, Hessian)>),
    /// Matrix-free symmetric map.
    Map {
        dim: usize,
        map: Arc<dyn LinearMap>,
    },
}

/// A matrix-free linear map on component vectors.
pub trait LinearMap: Send + Sync + Debug {
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl Hessian {
    pub fn dim(&self) -> usize {
        match self {
            Hessian::Zero { dim }
            | Hessian::Dense { dim, .. }
            | Hessian::Outer { dim, .. }
            | Hessian::Map { dim, .. } => *dim,
            Hessian::Stencil(s) => s.n_sites() * s.n,
            Hessian::Sum(parts) => parts.first().map_or(0, |p| p.1.dim()),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Hessian::Zero { dim } => vec![0.0; *dim],
            Hessian::Stencil(s) => s.apply(x),
            Hessian::Map { map, .. } => map.apply(x),
            Hessian::Dense { dim, data } => (0..*dim)
                .map(|r| {
                    data[r * dim..(r + 1) * dim]
                        .iter()
                        .zip(x)
                        .map(|(a, b)| a * b)
                        .sum()
                })
                .collect(),
            Hessian::Outer { dim, terms } => {
                let mut y = vec![0.0; *dim];
                for (c, u, v) in terms {
                    let d: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
                    if d != 0.0 {
                        for (yi, ui) in y.iter_mut().zip(u) {
                            *yi += c * d * ui;
                        }
                    }
                }
                y
            }
            Hessian::Sum(parts) => {
                let mut y = vec![0.0; x.len()];
                for (c, h) in parts {
                    for (yi, v) in y.iter_mut().zip(h.apply(x)) {
                        *yi += c * v;
                    }
                }
                y
            }
        }
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.apply(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut m = vec![0.0; dim * dim];
        let mut e = vec![0.0; dim];
        for c in 0..dim {
            e[c] = 1.0;
            for (r, v) in self.apply(&e).into_iter().enumerate() {
                m[r * dim + c] = v;
            }
            e[c] = 0.0;
        }
        m
    }
}

/// Behaviour of a functional; only `evaluate` is mandatory.
pub trait FunctionalImpl: Send + Sync + Debug {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64>;
    fn has_kernel1(&self) -> bool {
        false
    }
    fn has_kernel2(&self) -> bool {
        false
    }
    /// Chart-coordinate gradient as a density-weighted covector.
    fn kernel1(&self, _phi: &FieldConfig) -> Result<Vec<f64>> {
        Err(Error::MissingKernel("kernel1"))
    }
    /// Chart-coordinate Hessian.
    fn kernel2(&self, _phi: &FieldConfig) -> Result<Hessian> {
        Err(Error::MissingKernel("kernel2"))
    }
    /// Value when the functional does not depend on the field.
    fn constant_value(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct Functional {
    pub inner: Arc<dyn FunctionalImpl>,
    pub class: FunctionalClass,
    /// Declared support; `None` when unknown.
    pub support: Option<SiteSet>,
    pub name: String,
}

impl Functional {
    pub fn new(
        inner: impl FunctionalImpl + 'static,
        class: FunctionalClass,
        support: Option<SiteSet>,
        name: impl Into<String>,
    ) -> Self {
        Functional {
            inner: Arc::new(inner),
            class,
            support,
            name: name.into(),
        }
    }

    pub fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        self.inner.evaluate(phi)
    }

    pub fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        self.inner.kernel1(phi)
    }

    pub fn kernel2(&self, phi: &FieldConfig) -> Result<Hessian> {
        self.inner.kernel2(phi)
    }

    pub fn has_kernel1(&self) -> bool {
        self.inner.has_kernel1()
    }

    pub fn has_kernel2(&self) -> bool {
        self.inner.has_kernel2()
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.inner.constant_value()
    }

    pub fn constant(c: f64) -> Self {
        Functional::new(
            ConstantFunctional { c },
            FunctionalClass::Microlocal,
            None,
            format!("{c}"),
        )
    }

    pub fn unit() -> Self {
        Self::constant(1.0)
    }

    pub fn add(&self, other: &Functional) -> Functional {
        smooth_compose(
            Arc::new(Affine {
                c0: 0.0,
                coeffs: vec![1.0, 1.0],
            }),
            &[self.clone(), other.clone()],
        )
        .named(format!("({} + {})", self.name, other.name))
    }

    pub fn scale(&self, z: f64) -> Functional {
        smooth_compose(
            Arc::new(Affine {
                c0: 0.0,
                coeffs: vec![z],
            }),
            std::slice::from_ref(self),
        )
        .named(format!("{z}*{}", self.name))
    }

    pub fn mul(&self, other: &Functional) -> Functional {
        smooth_compose(Arc::new(Product), &[self.clone(), other.clone()])
            .named(format!("{}*{}", self.name, other.name))
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

#[derive(Debug)]
struct Composite {
    psi: Arc<dyn SmoothFn>,
    parts: Vec<Functional>,
}

impl Composite {
    fn args(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        self.parts.iter().map(|p| p.evaluate(phi)).collect()
    }
}

impl FunctionalImpl for Composite {
    fn evaluate(&self, phi: &FieldConfig) -> Result<f64> {
        Ok(self.psi.value(&self.args(phi)?))
    }
    fn has_kernel1(&self) -> bool {
        self.parts
            .iter()
            .all(|p| p.constant_value().is_some() || p.has_kernel1())
    }
    fn has_kernel2(&self) -> bool {
        self.parts
            .iter()
            .all(|p| p.constant_value().is_some() || (p.has_kernel1() && p.has_kernel2()))
    }
    fn kernel1(&self, phi: &FieldConfig) -> Result<Vec<f64>> {
        let z = self.args(phi)?;
        let g = self.psi.grad(&z);
        let mut out = vec![0.0; phi.values.len()];
        for (p, gj) in self.parts.iter().zip(g) {
            if p.constant_value().is_some() || gj == 0.0 {
                continue;
            }
            for (o, k) in out.iter_mut().zip(p.kernel1(phi)?) {
                *o += gj * k;
            }
        }
        Ok(out)
    }
    fn kernel2(&self, phi: &FieldConfig) -> Result<Hessian> {
        let dim = phi.values.len();
        let z = self.args(phi)?;
        let g = self.psi.grad(&z);
        let h = self.psi.hess(&z);
        let m = self.parts.len();
        let mut sum = Vec::new();
        let mut k1 = Vec::with_capacity(m);
        for (p, &gj) in self.parts.iter().zip(&g) {
            if p.constant_value().is_some() {
                k1.push(None);
                continue;
            }
            if gj != 0.0 {
                sum.push((gj, p.kernel2(phi)?));
            }
            k1.push(Some(p.kernel1(phi)?));
        }
        let mut terms = Vec::new();
        for j in 0..m {
            for k in 0..m {
                if let (Some(u), Some(v)) = (&k1[j], &k1[k]) {
                    let c = h[j * m + k];
                    if c != 0.0 {
                        terms.push((c, u.clone(), v.clone()));
                    }
                }
            }
        }
        if !terms.is_empty() {
            sum.push((1.0, Hessian::Outer { dim, terms }));
        }
        Ok(if sum.is_empty() {
            Hessian::Zero { dim }
        } else {
            Hessian::Sum(sum)
        })
    }
    fn constant_value(&self) -> Option<f64> {
        let z: Option<Vec<f64>> = self.parts.iter().map(|p| p.constant_value()).collect();
        z.map(|z| self.psi.value(&z))
    }
}

/// `psi(F_1, ..., F_n)` with chain-rule kernels; support is the union of the supports.
pub fn smooth_compose(psi: Arc<dyn SmoothFn>, parts: &[Functional]) -> Functional {
    assert_eq!(psi.arity(), parts.len(), "arity mismatch");
    let live: Vec<&Functional> = parts
        .iter()
        .filter(|p| p.constant_value().is_none())
        .collect();
    let weakest = live
        .iter()
        .map(|p| p.class)
        .min()
        .unwrap_or(FunctionalClass::Microlocal);
    let class = if psi.is_affine() {
        weakest
    } else {
        weakest.min(FunctionalClass::Regular)
    };
    let mut support: Option<SiteSet> = None;
    let mut known = true;
    for p in &live {
        match (&p.support, &support) {
            (Some(s), None) => support = Some(s.clone()),
            (Some(s), Some(acc)) => support = Some(acc.union(s)),
            (None, _) => known = false,
        }
    }
    let support = if !known {
        None
    } else {
        support.or_else(|| {
            parts
                .iter()
                .find_map(|p| p.support.as_ref().map(|s| s.intersection(&s.complement())))
        })
    };
    let name = format!(
        "{}({})",
        psi.name(),
        parts
            .iter()
            .map(|p| p.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Functional {
        inner: Arc::new(Composite {
            psi,
            parts: parts.to_vec(),
        }),
        class,
        support,
        name,
    }
}

/// A complex-valued functional `re + i im`, for the involution.
#[derive(Debug, Clone)]
pub struct ComplexFunctional {
    pub re: Functional,
    pub im: Functional,
}

impl ComplexFunctional {
    pub fn real(f: Functional) -> Self {
        ComplexFunctional {
            re: f,
            im: Functional::constant(0.0),
        }
    }

    pub fn evaluate(&self, phi: &FieldConfig) -> Result<Complex64> {
        Ok(Complex64::new(
            self.re.evaluate(phi)?,
            self.im.evaluate(phi)?,
        ))
    }

    pub fn conj(&self) -> Self {
        ComplexFunctional {
            re: self.re.clone(),
            im: self.im.scale(-1.0),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        ComplexFunctional {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
        }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        ComplexFunctional {
            re: self.re.scale(z.re).add(&self.im.scale(-z.im)),
            im: self.re.scale(z.im).add(&self.im.scale(z.re)),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        ComplexFunctional {
            re: self.re.mul(&o.re).add(&self.im.mul(&o.im).scale(-1.0)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }
}
