//! Standard lattices, backgrounds and random built-in functionals shared by the
//! verification suite, the CLI and the tests.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{FieldConfig, Variation};
use crate::geometry::TargetGeometry;
use crate::lattice::{LorentzianLattice, SiteSet};
use crate::observables::{ActionFunctional, Functional, PointPolynomial};
use crate::variational::GeneralizedLagrangian;
use crate::wavemaps::bump_weights;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Minkowski lattice on `[0, T] x [0, L)` with `n_t x n_x` sites and `dt = dx / 2`.
pub fn half_courant(n_t: usize, n_x: usize, length: f64) -> Result<Arc<LorentzianLattice>> {
    let dx = length / n_x as f64;
    Ok(Arc::new(LorentzianLattice::minkowski(
        n_t,
        n_x,
        0.5 * dx,
        dx,
    )?))
}

pub fn duration(lat: &LorentzianLattice) -> f64 {
    (lat.n_t - 1) as f64 * lat.dt
}

pub fn length(lat: &LorentzianLattice) -> f64 {
    lat.n_x as f64 * lat.dx
}

pub fn flat(dim: usize) -> Arc<TargetGeometry> {
    Arc::new(TargetGeometry::Flat { dim })
}

pub fn sphere() -> Arc<TargetGeometry> {
    Arc::new(TargetGeometry::Sphere2Stereographic)
}

/// `amp sin(k (x - t))` with `k` the `mode`-th periodic wavenumber.
pub fn plane_wave(lat: Arc<LorentzianLattice>, amp: f64, mode: usize) -> Result<FieldConfig> {
    let k = 2.0 * PI * mode as f64 / length(&lat);
    FieldConfig::from_fn(lat, flat(1), move |t, x| vec![amp * (k * (x - t)).sin()])
}

/// Random smooth sphere background with `|y| < 0.5` and nonzero jets.
pub fn random_sphere_background(
    lat: Arc<LorentzianLattice>,
    rng: &mut ChaCha8Rng,
) -> Result<FieldConfig> {
    let l = length(&lat);
    let a: f64 = rng.gen_range(0.1..0.3);
    let b: f64 = rng.gen_range(0.1..0.3);
    let (m1, m2) = (rng.gen_range(1..3) as f64, rng.gen_range(1..3) as f64);
    let (p1, p2): (f64, f64) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let (w1, w2): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let k = 2.0 * PI / l;
    FieldConfig::from_fn(lat, sphere(), move |t, x| {
        vec![
            a * (m1 * k * x + w1 * t + p1).sin(),
            b * (m2 * k * x + w2 * t + p2).cos(),
        ]
    })
}

/// Random smooth scalar background of modest amplitude.
pub fn random_scalar_background(
    lat: Arc<LorentzianLattice>,
    rng: &mut ChaCha8Rng,
) -> Result<FieldConfig> {
    let l = length(&lat);
    let a: f64 = rng.gen_range(0.2..1.0);
    let m = rng.gen_range(1..4) as f64;
    let p: f64 = rng.gen_range(0.0..2.0 * PI);
    let w: f64 = rng.gen_range(-1.0..1.0);
    let k = 2.0 * PI / l;
    FieldConfig::from_fn(lat, flat(1), move |t, x| {
        vec![a * (m * k * x + w * t + p).sin()]
    })
}

/// Physical bump location `(t0, x0, r)` at least `margin` away from the time ends.
pub fn random_bump(
    lat: &LorentzianLattice,
    rng: &mut ChaCha8Rng,
    r: (f64, f64),
) -> (f64, f64, f64) {
    let big_t = duration(lat);
    let radius = rng.gen_range(r.0..r.1);
    let t0 = rng.gen_range(radius + 2.0 * lat.dt..big_t - radius - 2.0 * lat.dt);
    let x0 = rng.gen_range(0.0..length(lat));
    (t0, x0, radius)
}

fn random_dir(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect()
}

/// One of the built-in functionals with kernels: linear, quadratic, cubic point
/// polynomial or a cut-off action of `gl`, smeared by a random bump.
pub fn random_builtin(
    lat: &LorentzianLattice,
    n: usize,
    gl: &GeneralizedLagrangian,
    rng: &mut ChaCha8Rng,
) -> Functional {
    let (t0, x0, r) = random_bump(lat, rng, (0.15, 0.25));
    let kind = rng.gen_range(0..4);
    let dir = random_dir(rng, n, 5.0);
    match kind {
        0 => PointPolynomial::linear(lat, n, bump_weights(lat, n, t0, x0, r, &dir)),
        1 => PointPolynomial::quadratic(lat, n, bump_weights(lat, n, t0, x0, r, &dir)),
        2 => {
            let c = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            PointPolynomial::polynomial(lat, n, bump_weights(lat, n, t0, x0, r, &dir), c)
        }
        _ => {
            let amp = rng.gen_range(0.5..2.0);
            let cutoff = bump_weights(lat, 1, t0, x0, r, &[amp]);
            ActionFunctional::functional(gl.clone(), lat, cutoff)
        }
    }
}

/// A random variation supported on a bump, scaled so `max |X| = amp`.
pub fn random_bump_variation(
    lat: &LorentzianLattice,
    n: usize,
    rng: &mut ChaCha8Rng,
    amp: f64,
) -> Variation {
    let (t0, x0, r) = random_bump(lat, rng, (0.1, 0.2));
    let dir = random_dir(rng, n, 1.0);
    let norm = dir.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let dir: Vec<f64> = dir.iter().map(|v| amp * v / norm).collect();
    Variation::from_vec(lat, n, bump_weights(lat, n, t0, x0, r, &dir))
}

/// Two random bump variations whose supports are at least `gap` sites apart.
pub fn disjoint_pair(
    lat: &LorentzianLattice,
    n: usize,
    rng: &mut ChaCha8Rng,
    amp: f64,
    gap: usize,
) -> (Variation, Variation) {
    loop {
        let a = random_bump_variation(lat, n, rng, amp);
        let b = random_bump_variation(lat, n, rng, amp);
        let (sa, sb) = (a.support(lat), b.support(lat));
        if sa.is_empty() || sb.is_empty() {
            continue;
        }
        if !sa.dilate(gap).intersects(&sb) {
            return (a, b);
        }
    }
}

/// Random vector with entries in `[-1, 1]`.
pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Sites of rows `lo..=hi`.
pub fn rows(lat: &LorentzianLattice, lo: usize, hi: usize) -> SiteSet {
    let mask = (0..lat.n_sites())
        .map(|s| {
            let it = s / lat.n_x;
            it >= lo && it <= hi
        })
        .collect();
    SiteSet::from_mask(lat, mask)
}
