//! The invariant suite behind `verify` and the acceptance test.
//!
//! Every check is deterministic for a given seed; wall-clock measurements are
//! left to callers so reports stay byte-identical.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::converge::{self, Quantity};
use super::fixtures::{self, rng};
use crate::error::{Error, Result};
use crate::field::{chart_backward, interpolate_sections, FieldConfig, Variation};
use crate::geometry::TargetGeometry;
use crate::green::{propagator_derivative, GreenKind, GreenOperator, DEFAULT_DENSE_LIMIT};
use crate::lattice::{LorentzianLattice, SitePoint, SiteSet};
use crate::observables::{
    additivity_test, global_additivity_glued, smooth_compose, ActionFunctional, Exp1MinusChiSq,
    Functional, PointPolynomial,
};
use crate::peierls::{
    bracket_gradient_fd, bracket_region, jacobi_report, lagrangian_locality_check, leibniz_check,
    onshell_ideal_element, peierls_bracket, PeierlsContext, VariationFamily,
};
use crate::variational::{
    el_kernel, linearize, reconstruct_density, GeneralizedLagrangian, MassBump,
};
use crate::wavemaps::{
    bump_weights, generic_el, generic_linearized, geodesic_background, preset_lattice, wave_map_el,
    wave_map_linearized, WaveMapModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Reduced sizes for routine runs.
    #[default]
    Quick,
    /// The sizes named in the acceptance criteria.
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    fn make(name: &str, passed: bool, value: f64, threshold: f64) -> Self {
        let finite = value.is_finite() && threshold.is_finite();
        Check {
            name: name.to_string(),
            passed: passed && finite,
            value: if value.is_finite() { value } else { f64::MAX },
            threshold: if threshold.is_finite() {
                threshold
            } else {
                f64::MAX
            },
            note: if finite {
                String::new()
            } else {
                "non-finite value".into()
            },
        }
    }

    /// Passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value < threshold, value, threshold)
    }

    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value <= threshold, value, threshold)
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value >= threshold, value, threshold)
    }

    /// Passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value > threshold, value, threshold)
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::make(name, ok, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        self.note = if self.note.is_empty() {
            note
        } else {
            format!("{}; {note}", self.note)
        };
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "green operator support"),
    (2, "retarded kernel accuracy"),
    (3, "adjointness"),
    (4, "bracket laws"),
    (5, "jacobi identity"),
    (6, "normal hyperbolicity"),
    (7, "euler-lagrange correctness"),
    (8, "additivity and locality"),
    (9, "density reconstruction"),
    (10, "on-shell ideal"),
    (11, "propagator derivative"),
];

pub fn title(id: u8) -> &'static str {
    CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, t)| *t)
        .unwrap_or("unknown")
}

pub fn run_criterion(id: u8, profile: Profile, seed: u64) -> Result<CriterionReport> {
    let seed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(id as u64);
    let checks = match id {
        1 => green_support(profile, seed)?,
        2 => retarded_accuracy(profile)?,
        3 => adjointness(profile, seed)?,
        4 => bracket_laws(profile, seed)?,
        5 => jacobi(profile)?,
        6 => normal_hyperbolicity(profile, seed)?,
        7 => euler_lagrange(profile, seed)?,
        8 => additivity(profile, seed)?,
        9 => reconstruction(profile, seed)?,
        10 => onshell_ideal(profile, seed)?,
        11 => propagator_derivative_check(profile, seed)?,
        _ => return Err(Error::UnknownName(format!("criterion {id}"))),
    };
    Ok(CriterionReport {
        id,
        title: title(id).to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Run every criterion; independent criteria run concurrently, results are in id order.
pub fn run_all(profile: Profile, seed: u64) -> Result<Vec<CriterionReport>> {
    CRITERIA
        .par_iter()
        .map(|(id, _)| run_criterion(*id, profile, seed))
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn zero_scalar(lat: Arc<LorentzianLattice>) -> Result<FieldConfig> {
    FieldConfig::constant(lat, fixtures::flat(1), &[0.0])
}

fn sphere_gl() -> GeneralizedLagrangian {
    GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic)
}

/// Largest `|X|` outside `allowed`, and whether `X` is nonzero somewhere.
fn outside(x: &[f64], n: usize, allowed: &SiteSet) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    for (k, v) in x.iter().enumerate() {
        if !allowed.contains_index(k / n) {
            worst = worst.max(v.abs());
        }
    }
    (worst, x.iter().any(|v| *v != 0.0))
}

// 1 -----------------------------------------------------------------------

fn support_sweep(
    green: &GreenOperator,
    n: usize,
    sources: &[(SitePoint, usize)],
) -> Result<(f64, f64, bool)> {
    let lat = green.op.lattice();
    let ret = green.with_kind(GreenKind::Retarded);
    let adv = green.with_kind(GreenKind::Advanced);
    let per: Vec<(f64, f64, bool)> = sources
        .par_iter()
        .map(|&(p, comp)| -> Result<(f64, f64, bool)> {
            let mut e = vec![0.0; lat.n_sites() * n];
            e[lat.site(p) * n + comp] = 1.0;
            let (r, nr) = outside(&ret.apply_raw(&e)?, n, &lat.causal_future(p));
            let (a, na) = outside(&adv.apply_raw(&e)?, n, &lat.causal_past(p));
            Ok((r, a, nr || na))
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().fold((0.0, 0.0, false), |(r, a, nz), x| {
        (r.max(x.0), a.max(x.1), nz || x.2)
    }))
}

fn random_sources(
    lat: &LorentzianLattice,
    n: usize,
    count: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<(SitePoint, usize)> {
    (0..count)
        .map(|_| {
            (
                SitePoint::new(rng.gen_range(0..lat.n_t), rng.gen_range(0..lat.n_x)),
                rng.gen_range(0..n),
            )
        })
        .collect()
}

fn green_support(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let (n_t, n_x, count) = match profile {
        Profile::Full => (128, 64, 100),
        Profile::Quick => (64, 32, 20),
    };
    let mut r = rng(seed);
    let lat = fixtures::half_courant(n_t, n_x, 2.0)?;
    let phi = zero_scalar(lat.clone())?;
    let op = linearize(&GeneralizedLagrangian::free_scalar(), &phi, &phi.target)?;
    let green = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
    let sources = random_sources(&lat, 1, count, &mut r);
    let (ret, adv, nonzero) = support_sweep(&green, 1, &sources)?;

    let small = fixtures::half_courant(n_t / 2, n_x / 2, 2.0)?;
    let bg = fixtures::random_sphere_background(small.clone(), &mut r)?;
    let op = linearize(&sphere_gl(), &bg, &bg.target)?;
    let green = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
    let sources = random_sources(&small, 2, count / 5, &mut r);
    let (sret, sadv, snonzero) = support_sweep(&green, 2, &sources)?;
    Ok(vec![
        Check::at_most("free scalar retarded response outside J+", ret, 0.0)
            .with_note(format!("{count} sources on {n_t}x{n_x}")),
        Check::at_most("free scalar advanced response outside J-", adv, 0.0),
        Check::flag("free scalar responses nontrivial", nonzero),
        Check::at_most("sphere retarded response outside J+", sret, 0.0),
        Check::at_most("sphere advanced response outside J-", sadv, 0.0),
        Check::flag("sphere responses nontrivial", snonzero),
    ])
}

// 2 -----------------------------------------------------------------------

fn retarded_accuracy(profile: Profile) -> Result<Vec<Check>> {
    let sizes: Vec<usize> = match profile {
        Profile::Full => vec![100, 200, 400],
        Profile::Quick => vec![50, 100],
    };
    let target = match profile {
        Profile::Full => 200,
        Profile::Quick => 100,
    };
    let table = converge::run(Quantity::RetardedKernel, &sizes)?;
    let row = table
        .rows
        .iter()
        .position(|r| r.resolution == target)
        .expect("target resolution");
    let err = table.rows[row].error;
    let rate = table.rows[row].rate.unwrap_or(0.0);
    let pointwise: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{}: {:.4}", r.resolution, r.auxiliary))
        .collect();
    Ok(vec![
        Check::below(&format!("binned L1 error at {target}x{target}"), err, 0.05),
        Check::at_least(&format!("rate {}->{target}", target / 2), rate, 0.8)
            .with_note(format!("pointwise interior L1 {}", pointwise.join(", "))),
    ])
}

// 3 -----------------------------------------------------------------------

fn adjoint_defect(
    green: &GreenOperator,
    pairs: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<f64> {
    let dim = green.op.base.values.len();
    let uv: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| {
            (
                fixtures::random_vector(rng, dim),
                fixtures::random_vector(rng, dim),
            )
        })
        .collect();
    let ret = green.with_kind(GreenKind::Retarded);
    let adv = green.with_kind(GreenKind::Advanced);
    let d: Vec<f64> = uv
        .par_iter()
        .map(|(u, v)| -> Result<f64> {
            let a = dot(&ret.apply_raw(u)?, v);
            let b = dot(u, &adv.apply_raw(v)?);
            Ok((a - b).abs() / 1f64.max(a.abs()).max(b.abs()))
        })
        .collect::<Result<_>>()?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

fn causal_antisymmetry(green: &GreenOperator) -> Result<f64> {
    let causal = green.with_kind(GreenKind::Causal);
    let m = causal.dense_kernel(DEFAULT_DENSE_LIMIT)?;
    let dim = green.op.base.values.len();
    let scale = max_abs(&m).max(1.0);
    let worst = (0..dim)
        .into_par_iter()
        .map(|i| {
            (0..dim).fold(0.0f64, |w, j| {
                w.max((m[i * dim + j] + m[j * dim + i]).abs())
            })
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst / scale)
}

fn adjointness(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let pairs = match profile {
        Profile::Full => 50,
        Profile::Quick => 10,
    };
    let lat = fixtures::half_courant(32, 32, 2.0)?;
    let phi = fixtures::random_scalar_background(lat.clone(), &mut r)?;
    let op = linearize(&GeneralizedLagrangian::kg_mass(1.0), &phi, &phi.target)?;
    let kg = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
    let bg = fixtures::random_sphere_background(lat.clone(), &mut r)?;
    let op = linearize(&sphere_gl(), &bg, &bg.target)?;
    let sph = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
    let d_kg = adjoint_defect(&kg, pairs, &mut r)?;
    let d_sph = adjoint_defect(&sph, pairs, &mut r)?;

    let nd = match profile {
        Profile::Full => 48,
        Profile::Quick => 24,
    };
    let dl = fixtures::half_courant(nd, nd, 2.0)?;
    let phi = zero_scalar(dl.clone())?;
    let op = linearize(&GeneralizedLagrangian::free_scalar(), &phi, &phi.target)?;
    let free = GreenOperator::new(Arc::new(op), GreenKind::Retarded)?;
    let anti_free = causal_antisymmetry(&free)?;
    let sl = fixtures::half_courant(16, 16, 2.0)?;
    let bg = fixtures::random_sphere_background(sl, &mut r)?;
    let op = linearize(&sphere_gl(), &bg, &bg.target)?;
    let anti_sph = causal_antisymmetry(&GreenOperator::new(Arc::new(op), GreenKind::Retarded)?)?;
    Ok(vec![
        Check::below("<G+u,v> = <u,G-v> (Klein-Gordon background)", d_kg, 1e-11)
            .with_note(format!("{pairs} random pairs")),
        Check::below("<G+u,v> = <u,G-v> (sphere background)", d_sph, 1e-11),
        Check::below(
            &format!("causal kernel antisymmetry {nd}x{nd} free scalar"),
            anti_free,
            1e-11,
        ),
        Check::below("causal kernel antisymmetry 16x16 sphere", anti_sph, 1e-11),
    ])
}

// 4 -----------------------------------------------------------------------

struct LawStats {
    antisym: f64,
    forms: f64,
    forms_adv: f64,
    leibniz: f64,
    support_ok: bool,
}

fn bracket_law_stats(
    gl: &GeneralizedLagrangian,
    phi: &FieldConfig,
    trials: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<LawStats> {
    let lat = phi.lattice.clone();
    let n = phi.n();
    let triples: Vec<[Functional; 3]> = (0..trials)
        .map(|_| {
            [
                fixtures::random_builtin(&lat, n, gl, rng),
                fixtures::random_builtin(&lat, n, gl, rng),
                fixtures::random_builtin(&lat, n, gl, rng),
            ]
        })
        .collect();
    let ctx = PeierlsContext::new(gl, phi)?;
    let stats: Vec<(f64, f64, f64, f64, bool)> = triples
        .par_iter()
        .map(|[f, g, h]| -> Result<_> {
            let rep = peierls_bracket(gl, f, g, phi)?;
            let back = ctx.bracket(g, f)?;
            let scale = 1f64
                .max(rep.retarded_product.abs())
                .max(rep.advanced_product.abs());
            let adv_form = ctx.advanced_product(g, f)? - rep.advanced_product;
            let lhs = ctx.bracket(f, &g.mul(h))?;
            let leib = leibniz_check(gl, f, g, h, phi)? / 1f64.max(lhs.abs());
            Ok((
                (rep.value + back).abs() / scale,
                (rep.value - rep.alternative_form).abs() / scale,
                (rep.value - adv_form).abs() / scale,
                leib,
                rep.support_check,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(stats.iter().fold(
        LawStats {
            antisym: 0.0,
            forms: 0.0,
            forms_adv: 0.0,
            leibniz: 0.0,
            support_ok: true,
        },
        |s, x| LawStats {
            antisym: s.antisym.max(x.0),
            forms: s.forms.max(x.1),
            forms_adv: s.forms_adv.max(x.2),
            leibniz: s.leibniz.max(x.3),
            support_ok: s.support_ok && x.4,
        },
    ))
}

/// Linear functionals on spacelike-separated bumps at equal time.
fn disjoint_pair(lat: &LorentzianLattice, n: usize) -> (Functional, Functional) {
    let t0 = 0.5 * fixtures::duration(lat);
    let l = fixtures::length(lat);
    let dir = vec![1.0; n];
    (
        PointPolynomial::polynomial(
            lat,
            n,
            bump_weights(lat, n, t0, 0.25 * l, 0.1, &dir),
            [1.0, 0.5, 0.2],
        ),
        PointPolynomial::polynomial(
            lat,
            n,
            bump_weights(lat, n, t0, 0.75 * l, 0.1, &dir),
            [1.0, -0.3, 0.1],
        ),
    )
}

/// Timelike-related pair for the locality controls.
fn timelike_pair(lat: &LorentzianLattice, n: usize) -> (Functional, Functional) {
    let big_t = fixtures::duration(lat);
    let l = fixtures::length(lat);
    let dir = vec![20.0; n];
    (
        PointPolynomial::linear(
            lat,
            n,
            bump_weights(lat, n, 0.7 * big_t, 0.5 * l, 0.08, &dir),
        ),
        PointPolynomial::quadratic(
            lat,
            n,
            bump_weights(lat, n, 0.3 * big_t, 0.5 * l, 0.08, &dir),
        ),
    )
}

fn bracket_laws(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let trials = match profile {
        Profile::Full => 12,
        Profile::Quick => 4,
    };
    let lat = fixtures::half_courant(33, 32, 2.0)?;
    let free = GeneralizedLagrangian::free_scalar();
    let scalar_bg = fixtures::random_scalar_background(lat.clone(), &mut r)?;
    let sphere_bg = fixtures::random_sphere_background(lat.clone(), &mut r)?;
    let a = bracket_law_stats(&free, &scalar_bg, trials, &mut r)?;
    let b = bracket_law_stats(&sphere_gl(), &sphere_bg, trials, &mut r)?;

    let mut disjoint: f64 = 0.0;
    let mut disjoint_ok = true;
    for (gl, bg) in [(&free, &scalar_bg), (&sphere_gl(), &sphere_bg)] {
        let (f, g) = disjoint_pair(&lat, bg.n());
        let (sf, sg) = (f.support.clone().unwrap(), g.support.clone().unwrap());
        disjoint_ok &= lat.causally_disjoint(&sf, &sg)?;
        let rep = peierls_bracket(gl, &f, &g, bg)?;
        let scale = 1f64
            .max(rep.retarded_product.abs())
            .max(rep.advanced_product.abs());
        disjoint = disjoint.max(rep.value.abs() / scale);
    }

    // Lagrangian locality: mass bump off the bracket region, then inside it.
    let (f, g) = timelike_pair(&lat, 1);
    let region = bracket_region(&f, &g, &scalar_bg)?;
    let keep = region.dilate(2);
    let far: Vec<f64> = (0..lat.n_sites())
        .map(|s| if keep.contains_index(s) { 0.0 } else { 1.0 })
        .collect();
    let window_far = SiteSet::from_mask(&lat, far.iter().map(|w| *w != 0.0).collect());
    let l2 = free.plus(Arc::new(MassBump {
        n: 1,
        m2: 4.0,
        window: Arc::new(far),
    }));
    let pos = lagrangian_locality_check(&free, &l2, &window_far, &f, &g, &scalar_bg, true)?;
    let mid = bump_weights(
        &lat,
        1,
        0.5 * fixtures::duration(&lat),
        0.5 * fixtures::length(&lat),
        0.15,
        &[1.0],
    );
    let window_mid = SiteSet::from_mask(&lat, mid.iter().map(|w| *w != 0.0).collect());
    let l3 = free.plus(Arc::new(MassBump {
        n: 1,
        m2: 10.0,
        window: Arc::new(mid),
    }));
    let neg = lagrangian_locality_check(&free, &l3, &window_mid, &f, &g, &scalar_bg, false)?;

    Ok(vec![
        Check::below("antisymmetry (free scalar)", a.antisym, 1e-12)
            .with_note(format!("{trials} random triples")),
        Check::below("antisymmetry (sphere)", b.antisym, 1e-12),
        Check::below("R-A = R(F,G)-R(G,F) (free scalar)", a.forms, 1e-10),
        Check::below("R-A = A(G,F)-A(F,G) (free scalar)", a.forms_adv, 1e-10),
        Check::below("R-A = R(F,G)-R(G,F) (sphere)", b.forms, 1e-10),
        Check::below("R-A = A(G,F)-A(F,G) (sphere)", b.forms_adv, 1e-10),
        Check::flag(
            "disjoint control supports are causally disjoint",
            disjoint_ok,
        ),
        Check::below("causally disjoint bracket / scale", disjoint, 1e-12),
        Check::below("Leibniz rule (free scalar)", a.leibniz, 1e-10),
        Check::below("Leibniz rule (sphere)", b.leibniz, 1e-10),
        Check::flag(
            "support check (bracket invariant off its region)",
            a.support_ok && b.support_ok,
        ),
        Check::flag(
            "locality: modification off the region passes",
            pos.passed && !pos.overlaps_hull,
        )
        .with_note(format!("deviation {:.3e}", pos.deviation)),
        Check::above(
            "locality: modification inside the region deviates",
            neg.deviation,
            1e-6,
        )
        .with_note(format!("check passed = {}", neg.passed)),
    ])
}

// 5 -----------------------------------------------------------------------

fn jacobi(profile: Profile) -> Result<Vec<Check>> {
    // Free scalar, quadratic functionals.
    let lat = fixtures::half_courant(33, 32, 2.0)?;
    let phi = fixtures::plane_wave(lat.clone(), 0.7, 1)?;
    let free = GeneralizedLagrangian::free_scalar();
    let quad = |t0: f64, x0: f64, a: f64| {
        PointPolynomial::quadratic(&lat, 1, bump_weights(&lat, 1, t0, x0, 0.2, &[a]))
    };
    let (f, g, h) = (
        quad(0.7, 1.0, 30.0),
        quad(0.4, 1.1, 20.0),
        quad(0.55, 0.9, 10.0),
    );
    let free_rep = jacobi_report(&free, &f, &g, &h, &phi)?;
    let lin = |t0: f64, x0: f64| {
        PointPolynomial::linear(&lat, 1, bump_weights(&lat, 1, t0, x0, 0.2, &[10.0]))
    };
    let lin_rep = jacobi_report(&free, &lin(0.7, 1.0), &lin(0.4, 1.1), &lin(0.55, 0.9), &phi)?;

    // Wave maps, cubic functionals, three resolutions.
    let sizes: Vec<usize> = match profile {
        Profile::Full => vec![16, 32, 64],
        Profile::Quick => vec![16, 32, 64],
    };
    let table = converge::run(Quantity::Jacobi, &sizes)?;
    let res: Vec<f64> = table.rows.iter().map(|r| r.error).collect();
    let brackets: Vec<f64> = table.rows.iter().map(|r| r.auxiliary).collect();
    let disc = (brackets[brackets.len() - 1] - brackets[brackets.len() - 2]).abs();
    // Non-increasing up to a roundoff floor relative to the bracket size.
    let floor = 1e-12 * brackets.iter().fold(1e-300f64, |m, b| m.max(b.abs()));
    let monotone = res.windows(2).all(|w| w[1] <= w[0].max(floor));

    // Analytic bracket gradient against central differences at the coarsest level.
    let lat0 = preset_lattice(16, 0)?;
    let bg = crate::wavemaps::wavy_background(lat0.clone(), TargetGeometry::Sphere2Stereographic)?;
    let [_, g3, h3] = converge::jacobi_functionals(&lat0);
    let an = PeierlsContext::new(&sphere_gl(), &bg)?.bracket_gradient(&g3, &h3)?;
    let fd = bracket_gradient_fd(&sphere_gl(), &g3, &h3, &bg)?;
    let gdiff = an
        .iter()
        .zip(&fd)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / max_abs(&fd).max(1e-300);

    let fmt: Vec<String> = res.iter().map(|v| format!("{v:.2e}")).collect();
    Ok(vec![
        Check::below("free scalar quadratic residual", free_rep.residual, 1e-10).with_note(
            format!(
                "terms {:.3e} {:.3e} {:.3e}",
                free_rep.terms[0], free_rep.terms[1], free_rep.terms[2]
            ),
        ),
        Check::below("linear functionals residual", lin_rep.residual, 1e-14),
        Check::flag(
            "wave maps residual non-increasing over resolutions",
            monotone,
        )
        .with_note(format!("residuals {} (floor {floor:.1e})", fmt.join(" "))),
        Check::at_most(
            "wave maps final residual vs 10x propagator error",
            res[res.len() - 1],
            10.0 * disc,
        )
        .with_note(format!(
            "bracket change between last resolutions {disc:.3e}"
        )),
        Check::below(
            "analytic bracket gradient vs finite differences",
            gdiff,
            1e-5,
        ),
    ])
}

// 6 -----------------------------------------------------------------------

fn normal_hyperbolicity(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let count = match profile {
        Profile::Full => 20,
        Profile::Quick => 5,
    };
    let lat = fixtures::half_courant(17, 16, 2.0)?;
    let phi = fixtures::random_scalar_background(lat.clone(), &mut r)?;
    let nh = linearize(&GeneralizedLagrangian::free_scalar(), &phi, &phi.target)?
        .is_normally_hyperbolic(1e-12);
    let exact = nh.hyperbolic && nh.c_min == 1.0 && nh.c_max == 1.0;
    let backgrounds: Vec<FieldConfig> = (0..count)
        .map(|_| fixtures::random_sphere_background(lat.clone(), &mut r))
        .collect::<Result<_>>()?;
    let devs: Vec<(f64, f64)> = backgrounds
        .par_iter()
        .map(|bg| -> Result<(f64, f64)> {
            let generic = linearize(&sphere_gl(), bg, &bg.target)?.is_normally_hyperbolic(1e-12);
            let model = WaveMapModel::new(bg.lattice.clone(), TargetGeometry::Sphere2Stereographic);
            let special = wave_map_linearized(&model, bg)?.is_normally_hyperbolic(1e-12);
            let dev = |r: &crate::variational::NhReport| {
                if r.hyperbolic {
                    (r.c_min - 0.5).abs().max((r.c_max - 0.5).abs())
                } else {
                    f64::INFINITY
                }
            };
            Ok((dev(&generic), dev(&special)))
        })
        .collect::<Result<_>>()?;
    let worst = devs.iter().fold(0.0f64, |m, d| m.max(d.0));
    let worst_special = devs.iter().fold(0.0f64, |m, d| m.max(d.1));
    Ok(vec![
        Check::flag("free scalar factor c = 1 exactly", exact),
        Check::below("wave maps |c - 1/2| (generic linearization)", worst, 1e-12)
            .with_note(format!("{count} random sphere backgrounds")),
        Check::below(
            "wave maps |c - 1/2| (specialized linearization)",
            worst_special,
            1e-12,
        ),
    ])
}

// 7 -----------------------------------------------------------------------

fn euler_lagrange(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let sizes: Vec<usize> = match profile {
        Profile::Full => vec![32, 64, 128],
        Profile::Quick => vec![32, 64],
    };
    let plane = converge::run(Quantity::PlaneWaveResidual, &sizes)?;
    let geo = converge::run(Quantity::GeodesicResidual, &sizes)?;
    let constant = converge::run(Quantity::ConstantResidual, &sizes)?;

    let lat = fixtures::half_courant(17, 16, 2.0)?;
    let zero_flat = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[0.4])?;
    let flat_const =
        max_abs(&el_kernel(&GeneralizedLagrangian::free_scalar(), &zero_flat)?.components);
    let sc = FieldConfig::constant(lat.clone(), fixtures::sphere(), &[0.3, 0.1])?;
    let model = WaveMapModel::new(lat.clone(), TargetGeometry::Sphere2Stereographic);
    let special_const = max_abs(&wave_map_el(&model, &sc)?.components);

    let count = match profile {
        Profile::Full => 20,
        Profile::Quick => 5,
    };
    let backgrounds: Vec<FieldConfig> = (0..count)
        .map(|_| fixtures::random_sphere_background(lat.clone(), &mut r))
        .collect::<Result<_>>()?;
    let agree = backgrounds
        .par_iter()
        .map(|bg| -> Result<f64> {
            let a = wave_map_el(&model, bg)?;
            let b = generic_el(&model, bg)?;
            let la = wave_map_linearized(&model, bg)?;
            let lb = generic_linearized(&model, bg)?;
            let mut d = la.stencil.clone();
            d.add_scaled(&lb.stencil, -1.0);
            let el = a
                .components
                .iter()
                .zip(&b.components)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            Ok(el.max(d.max_abs()))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let rates = |t: &converge::ConvergenceTable| {
        t.rows
            .iter()
            .map(|r| format!("{}: {:.3e}", r.resolution, r.error))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok(vec![
        Check::at_least(
            "plane-wave residual rate",
            plane.min_rate().unwrap_or(0.0),
            1.8,
        )
        .with_note(rates(&plane)),
        Check::at_least(
            "geodesic wave-map residual rate",
            geo.min_rate().unwrap_or(0.0),
            1.8,
        )
        .with_note(rates(&geo)),
        Check::flag("constant sphere map residual exactly zero", constant.exact),
        Check::at_most("constant scalar residual", flat_const, 0.0),
        Check::at_most("constant map, specialized wave-map EL", special_const, 0.0),
        Check::below("specialized vs generic EL and linearization", agree, 1e-8)
            .with_note(format!("{count} random sphere backgrounds")),
    ])
}

// 8 -----------------------------------------------------------------------

fn additivity(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let pairs = match profile {
        Profile::Full => 50,
        Profile::Quick => 10,
    };
    let lat = fixtures::half_courant(33, 32, 2.0)?;
    let mut checks = Vec::new();
    for (label, gl, phi0) in [
        (
            "scalar",
            GeneralizedLagrangian::kg_mass(0.5),
            fixtures::random_scalar_background(lat.clone(), &mut r)?,
        ),
        (
            "sphere",
            sphere_gl(),
            fixtures::random_sphere_background(lat.clone(), &mut r)?,
        ),
    ] {
        let n = phi0.n();
        let t = fixtures::duration(&lat);
        let l = fixtures::length(&lat);
        let wide = |dir: &[f64]| bump_weights(&lat, n, 0.5 * t, 0.5 * l, 0.45, dir);
        let dir: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64).collect();
        let cutoff = bump_weights(&lat, 1, 0.5 * t, 0.5 * l, 0.45, &[1.0]);
        let builtins = vec![
            PointPolynomial::linear(&lat, n, wide(&dir)),
            PointPolynomial::quadratic(&lat, n, wide(&dir)),
            PointPolynomial::polynomial(&lat, n, wide(&dir), [0.3, -0.7, 1.1]),
            ActionFunctional::functional(gl.clone(), &lat, cutoff),
        ];
        let variations: Vec<(Variation, Variation)> = (0..pairs)
            .map(|_| fixtures::disjoint_pair(&lat, n, &mut r, 0.08, 2))
            .collect();
        let results: Vec<(f64, f64, bool)> = variations
            .par_iter()
            .map(|(x1, xm1)| -> Result<(f64, f64, bool)> {
                let phi1 = chart_backward(&phi0, x1)?;
                let phim1 = chart_backward(&phi0, xm1)?;
                let glued = interpolate_sections(&phi0, &phi1, &phim1)?.glued;
                let mut local: f64 = 0.0;
                let mut global: f64 = 0.0;
                let mut ok = true;
                for f in &builtins {
                    let a = additivity_test(f, &phi0, x1, xm1)?;
                    let g = global_additivity_glued(f, &glued, &phi1, &phi0, &phim1)?;
                    let sa = 1f64.max(a.lhs.abs());
                    let sg = 1f64.max(g.lhs.abs());
                    local = local.max((a.lhs - a.rhs).abs() / sa);
                    global = global.max((g.lhs - g.rhs).abs() / sg);
                    ok &= a.passed && g.passed;
                }
                Ok((local, global, ok))
            })
            .collect::<Result<_>>()?;
        let local = results.iter().fold(0.0f64, |m, x| m.max(x.0));
        let global = results.iter().fold(0.0f64, |m, x| m.max(x.1));
        let all = results.iter().all(|x| x.2);
        checks.push(
            Check::below(
                &format!("phi0-additivity of built-ins ({label})"),
                local,
                1e-10,
            )
            .with_note(format!(
                "{pairs} disjoint pairs x {} functionals",
                builtins.len()
            )),
        );
        checks.push(Check::below(
            &format!("global additivity of built-ins ({label})"),
            global,
            1e-10,
        ));
        checks.push(Check::flag(
            &format!("all additivity reports passed ({label})"),
            all,
        ));
    }

    // psi(int f phi) with psi = exp(1 - chi(z^2)): nonlinear in the smeared field.
    // Two disjoint bumps each move z by 0.45, so z^2 crosses the transition of chi
    // only when both are switched on.
    let phi0 = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[0.0])?;
    let t = fixtures::duration(&lat);
    let l = fixtures::length(&lat);
    let w = bump_weights(&lat, 1, 0.5 * t, 0.5 * l, 0.5, &[1.0]);
    let smear =
        |v: &[f64]| lat.integrate(&v.iter().zip(&w).map(|(p, q)| p * q).collect::<Vec<_>>());
    let lift = |x0: f64| {
        let b = bump_weights(&lat, 1, 0.5 * t, x0, 0.15, &[1.0]);
        let c = 0.45 / smear(&b);
        Variation::from_vec(&lat, 1, b.iter().map(|v| c * v).collect())
    };
    let reg = smooth_compose(
        Arc::new(Exp1MinusChiSq),
        &[PointPolynomial::linear(&lat, 1, w.clone())],
    );
    let (x1, xm1) = (lift(0.5 * l - 0.25), lift(0.5 * l + 0.25));
    let rep = additivity_test(&reg, &phi0, &x1, &xm1)?;
    checks.push(
        Check::above(
            "composite psi(int f phi) violates additivity",
            (rep.lhs - rep.rhs).abs(),
            1e-6,
        )
        .with_note(format!("report passed = {}", rep.passed)),
    );
    Ok(checks)
}

// 9 -----------------------------------------------------------------------

fn reconstruction(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let trials = match profile {
        Profile::Full => 10,
        Profile::Quick => 3,
    };
    let lat = fixtures::half_courant(25, 24, 2.0)?;
    let t = fixtures::duration(&lat);
    let l = fixtures::length(&lat);
    let mut checks = Vec::new();
    for kind in ["linear", "quadratic", "wave-map action"] {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let (phi0, f) = match kind {
                "linear" | "quadratic" => {
                    let phi0 = fixtures::random_scalar_background(lat.clone(), &mut r)?;
                    let w = bump_weights(&lat, 1, 0.5 * t, 0.5 * l, 0.4, &[2.0]);
                    let f = if kind == "linear" {
                        PointPolynomial::linear(&lat, 1, w)
                    } else {
                        PointPolynomial::quadratic(&lat, 1, w)
                    };
                    (phi0, f)
                }
                _ => {
                    let phi0 = fixtures::random_sphere_background(lat.clone(), &mut r)?;
                    let cutoff = bump_weights(&lat, 1, 0.5 * t, 0.5 * l, 0.6, &[1.0]);
                    (
                        phi0,
                        ActionFunctional::functional(sphere_gl(), &lat, cutoff),
                    )
                }
            };
            let x = fixtures::random_bump_variation(&lat, phi0.n(), &mut r, 0.1);
            let phi = chart_backward(&phi0, &x)?;
            let theta = reconstruct_density(&f, &phi0, &phi)?;
            let err = (f.evaluate(&phi)? - f.evaluate(&phi0)? - lat.integrate(&theta)).abs();
            worst = worst.max(err);
        }
        checks.push(Check::below(
            &format!("|F(phi) - F(phi0) - int theta| ({kind})"),
            worst,
            1e-8,
        ));
    }
    Ok(checks)
}

// 10 ----------------------------------------------------------------------

/// `(max |F_ideal|, max |{F_ideal, G}|, max |(G F_ideal)|, max |{G F_ideal, H}|, tolerance)`
/// over random built-ins at an on-shell background.
fn ideal_at(
    gl: &GeneralizedLagrangian,
    phi: &FieldConfig,
    trials: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<[f64; 5]> {
    let lat = phi.lattice.clone();
    let n = phi.n();
    let e = el_kernel(gl, phi)?;
    // Interior variations only: the boundary rows carry the free-boundary terms.
    let interior = fixtures::rows(&lat, 2, lat.n_t - 3);
    let residual = (0..lat.n_sites())
        .filter(|&s| interior.contains_index(s))
        .flat_map(|s| (0..n).map(move |i| s * n + i))
        .fold(0.0f64, |m, k| m.max(e.components[k].abs()));
    let ctx = PeierlsContext::new(gl, phi)?;
    let mut out = [0.0f64; 5];
    let mut tol: f64 = 0.0;
    for _ in 0..trials {
        let x = loop {
            let x = fixtures::random_bump_variation(&lat, n, rng, 1.0);
            if x.support(&lat).is_subset(&interior) && !x.is_zero() {
                break x;
            }
        };
        let alpha: Vec<f64> = (0..phi.values.len())
            .map(|k| {
                if interior.contains_index(k / n) {
                    x.components[k]
                } else {
                    0.0
                }
            })
            .collect();
        let fixed = onshell_ideal_element(gl, VariationFamily::Fixed(x.clone()));
        let scaled = onshell_ideal_element(gl, VariationFamily::Scaled(alpha.clone()));
        let g = fixtures::random_builtin(&lat, n, gl, rng);
        let h = fixtures::random_builtin(&lat, n, gl, rng);
        let l1x: f64 = x.components.iter().map(|v| v.abs()).sum();
        let l1a: f64 = alpha
            .iter()
            .zip(&phi.values)
            .map(|(a, p)| (a * p).abs())
            .sum();
        let gval = g.evaluate(phi)?.abs().max(1.0);
        for fi in [&fixed, &scaled] {
            let v = fi.evaluate(phi)?;
            let b = ctx.bracket(fi, &h)?;
            let prod = g.mul(fi);
            let pv = prod.evaluate(phi)?;
            let pb = ctx.bracket(&prod, &h)?;
            let k1h = ctx.solve(GreenKind::Causal, &h.kernel1(phi)?)?;
            let gb = ctx.bracket(&g, &h)?.abs();
            // EL residual times the size of the variation and of the propagated source.
            let size = l1x.max(l1a);
            let t = 10.0 * residual * size * (1.0 + max_abs(&k1h)) * gval * (1.0 + gb) + 1e-10;
            tol = tol.max(t);
            out[0] = out[0].max(v.abs() / t);
            out[1] = out[1].max(b.abs() / t);
            out[2] = out[2].max(pv.abs() / t);
            out[3] = out[3].max(pb.abs() / t);
        }
    }
    out[4] = tol;
    Ok(out)
}

fn onshell_ideal(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let trials = match profile {
        Profile::Full => 6,
        Profile::Quick => 2,
    };
    let lat = fixtures::half_courant(33, 32, 2.0)?;
    let constant = FieldConfig::constant(lat.clone(), fixtures::sphere(), &[0.2, -0.15])?;
    let geodesic = geodesic_background(lat.clone(), &[0.1, -0.05], &[0.3, 0.2])?;
    // dt = dx: the stencil is exact on plane waves.
    let aligned = Arc::new(LorentzianLattice::minkowski(
        33,
        32,
        2.0 / 32.0,
        2.0 / 32.0,
    )?);
    let wave = fixtures::plane_wave(aligned, 0.8, 1)?;
    let mut checks = Vec::new();
    for (label, gl, phi) in [
        ("constant sphere map", sphere_gl(), constant),
        ("geodesic sphere map", sphere_gl(), geodesic),
        (
            "free scalar plane wave, dt = dx",
            GeneralizedLagrangian::free_scalar(),
            wave,
        ),
    ] {
        let [v, b, pv, pb, tol] = ideal_at(&gl, &phi, trials, &mut r)?;
        checks.push(
            Check::at_most(&format!("ideal element / residual scale ({label})"), v, 1.0)
                .with_note(format!("tolerance {tol:.2e}")),
        );
        checks.push(Check::at_most(
            &format!("bracket with built-in / residual scale ({label})"),
            b,
            1.0,
        ));
        checks.push(Check::at_most(
            &format!("product G*F_ideal / residual scale ({label})"),
            pv,
            1.0,
        ));
        checks.push(Check::at_most(
            &format!("bracket of product / residual scale ({label})"),
            pb,
            1.0,
        ));
    }
    Ok(checks)
}

// 11 ----------------------------------------------------------------------

fn propagator_derivative_check(profile: Profile, seed: u64) -> Result<Vec<Check>> {
    let mut r = rng(seed);
    let n_x = match profile {
        Profile::Full => 32,
        Profile::Quick => 16,
    };
    let lat = preset_lattice(n_x, 0)?;
    let phi = fixtures::random_sphere_background(lat.clone(), &mut r)?;
    let gl = sphere_gl();
    let op = linearize(&gl, &phi, &phi.target)?;
    // A global variation, so every kind of propagated source feels it.
    let wiggle = fixtures::random_sphere_background(lat.clone(), &mut r)?;
    let x = Variation::from_vec(&lat, 2, wiggle.values.iter().map(|v| 0.5 * v).collect());
    let src = bump_weights(&lat, 2, 0.5, 1.0, 0.25, &[1.0, -0.7]);
    let steps = [1e-2, 5e-3, 2.5e-3];
    let mut checks = Vec::new();
    for kind in [GreenKind::Retarded, GreenKind::Advanced, GreenKind::Causal] {
        let analytic = propagator_derivative(&op, &x, kind)?.apply_raw(&src)?;
        let g0 = GreenOperator::new(Arc::new(op.clone()), kind)?.apply_raw(&src)?;
        let errs: Vec<f64> = steps
            .par_iter()
            .map(|&t| -> Result<f64> {
                let v: Vec<f64> = phi
                    .values
                    .iter()
                    .zip(&x.components)
                    .map(|(a, b)| a + t * b)
                    .collect();
                let opt = linearize(&gl, &phi.with_values(v)?, &phi.target)?;
                let gt = GreenOperator::new(Arc::new(opt), kind)?.apply_raw(&src)?;
                Ok((0..gt.len()).fold(0.0f64, |m, k| {
                    m.max(((gt[k] - g0[k]) / t - analytic[k]).abs())
                }))
            })
            .collect::<Result<_>>()?;
        let consts: Vec<f64> = errs.iter().zip(&steps).map(|(e, t)| e / t).collect();
        let (lo, hi) = consts
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
        let size = max_abs(&analytic);
        let rel = errs[2] / size.max(1e-300);
        let label = format!("{kind:?}").to_lowercase();
        checks.push(
            Check::below(
                &format!("{label}: spread of error/t over t"),
                hi / lo.max(1e-300),
                1.5,
            )
            .with_note(format!(
                "error/t = {:.4e} {:.4e} {:.4e}",
                consts[0], consts[1], consts[2]
            )),
        );
        checks.push(Check::below(
            &format!("{label}: relative error at t = 2.5e-3"),
            rel,
            1e-2,
        ));
        checks.push(Check::above(
            &format!("{label}: derivative nontrivial"),
            size,
            0.0,
        ));
        checks.push(Check::flag(
            &format!("{label}: error decreases with t"),
            errs.windows(2).all(|w| w[1] < w[0]),
        ));
    }
    Ok(checks)
}
