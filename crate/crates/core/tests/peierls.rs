use std::sync::Arc;

use peierls_lab::field::FieldConfig;
use peierls_lab::geometry::TargetGeometry;
use peierls_lab::lattice::SiteSet;
use peierls_lab::observables::{Functional, PointPolynomial};
use peierls_lab::peierls::{
    bracket_functional, bracket_gradient_fd, bracket_region, jacobi_report,
    lagrangian_locality_check, leibniz_check, onshell_ideal_element, peierls_bracket,
    PeierlsContext, VariationFamily,
};
use peierls_lab::scenario::converge;
use peierls_lab::scenario::fixtures::{self, rng};
use peierls_lab::variational::{GeneralizedLagrangian, MassBump};
use peierls_lab::wavemaps::bump_weights;
use peierls_lab::Error;
use proptest::prelude::*;

fn sphere() -> GeneralizedLagrangian {
    GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic)
}

#[test]
fn linear_functionals_pair_through_the_causal_propagator() {
    // For F = <f, phi>, G = <g, phi> the bracket is independent of the background.
    let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
    let gl = GeneralizedLagrangian::kg_mass(1.0);
    let f = PointPolynomial::linear(&lat, 1, bump_weights(&lat, 1, 0.2, 1.0, 0.15, &[5.0]));
    let g = PointPolynomial::linear(&lat, 1, bump_weights(&lat, 1, 0.6, 1.1, 0.15, &[5.0]));
    let mut r = rng(1);
    let a = peierls_bracket(
        &gl,
        &f,
        &g,
        &fixtures::random_scalar_background(lat.clone(), &mut r).unwrap(),
    )
    .unwrap();
    let b = peierls_bracket(
        &gl,
        &f,
        &g,
        &fixtures::random_scalar_background(lat.clone(), &mut r).unwrap(),
    )
    .unwrap();
    assert!(a.value != 0.0);
    assert!((a.value - b.value).abs() < 1e-13 * a.value.abs().max(1.0));
    assert!(a.forms_agree && a.support_check);
}

#[test]
fn spacelike_functionals_commute() {
    let lat = fixtures::half_courant(33, 32, 2.0).unwrap();
    let bg = fixtures::random_sphere_background(lat.clone(), &mut rng(2)).unwrap();
    let f = PointPolynomial::quadratic(&lat, 2, bump_weights(&lat, 2, 0.5, 0.5, 0.1, &[3.0, 1.0]));
    let g = PointPolynomial::polynomial(
        &lat,
        2,
        bump_weights(&lat, 2, 0.5, 1.5, 0.1, &[1.0, 3.0]),
        [1.0, 0.5, 0.5],
    );
    assert!(lat
        .causally_disjoint(f.support.as_ref().unwrap(), g.support.as_ref().unwrap())
        .unwrap());
    let rep = peierls_bracket(&sphere(), &f, &g, &bg).unwrap();
    assert_eq!(rep.value, 0.0);
}

#[test]
fn constants_are_central() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let bg = fixtures::random_scalar_background(lat.clone(), &mut rng(3)).unwrap();
    let f = PointPolynomial::quadratic(&lat, 1, bump_weights(&lat, 1, 0.5, 1.0, 0.3, &[1.0]));
    let ctx = PeierlsContext::new(&GeneralizedLagrangian::free_scalar(), &bg).unwrap();
    assert_eq!(ctx.bracket(&f, &Functional::constant(3.0)).unwrap(), 0.0);
}

#[test]
fn locality_check_refuses_windows_in_the_region() {
    let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
    let bg = fixtures::random_scalar_background(lat.clone(), &mut rng(4)).unwrap();
    let free = GeneralizedLagrangian::free_scalar();
    let f = PointPolynomial::linear(&lat, 1, bump_weights(&lat, 1, 0.3, 1.0, 0.15, &[5.0]));
    let g = PointPolynomial::quadratic(&lat, 1, bump_weights(&lat, 1, 0.7, 1.0, 0.15, &[5.0]));
    let region = bracket_region(&f, &g, &bg).unwrap();
    let w: Vec<f64> = (0..lat.n_sites())
        .map(|s| if region.contains_index(s) { 1.0 } else { 0.0 })
        .collect();
    let win = SiteSet::from_mask(&lat, w.iter().map(|v| *v != 0.0).collect());
    let l2 = free.plus(Arc::new(MassBump {
        n: 1,
        m2: 1.0,
        window: Arc::new(w),
    }));
    assert!(matches!(
        lagrangian_locality_check(&free, &l2, &win, &f, &g, &bg, true),
        Err(Error::ModificationOverlapsHull)
    ));
    let rep = lagrangian_locality_check(&free, &l2, &win, &f, &g, &bg, false).unwrap();
    assert!(rep.overlaps_hull && !rep.passed);
}

#[test]
fn jacobi_for_quadratic_scalar_functionals() {
    let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
    let bg = fixtures::plane_wave(lat.clone(), 0.5, 1).unwrap();
    let q = |t: f64, x: f64, a: f64| {
        PointPolynomial::quadratic(&lat, 1, bump_weights(&lat, 1, t, x, 0.2, &[a]))
    };
    let rep = jacobi_report(
        &GeneralizedLagrangian::free_scalar(),
        &q(0.7, 1.0, 30.0),
        &q(0.4, 1.1, 20.0),
        &q(0.55, 0.9, 10.0),
        &bg,
    )
    .unwrap();
    assert!(rep.terms.iter().any(|t| t.abs() > 1e-6));
    assert!(rep.residual < 1e-10 * rep.scale);
}

#[test]
fn jacobi_for_wave_maps_at_roundoff() {
    let (res, bracket) = converge::jacobi_at(16).unwrap();
    assert!(bracket.abs() > 1e-4);
    assert!(res < 1e-12 * bracket.abs().max(1.0));
}

#[test]
fn bracket_gradient_matches_finite_differences() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let bg = fixtures::random_sphere_background(lat.clone(), &mut rng(5)).unwrap();
    let g = PointPolynomial::quadratic(&lat, 2, bump_weights(&lat, 2, 0.3, 1.0, 0.4, &[3.0, 1.0]));
    let h = PointPolynomial::polynomial(
        &lat,
        2,
        bump_weights(&lat, 2, 0.6, 1.2, 0.4, &[1.0, -2.0]),
        [1.0, 0.3, 0.2],
    );
    let an = PeierlsContext::new(&sphere(), &bg)
        .unwrap()
        .bracket_gradient(&g, &h)
        .unwrap();
    let fd = bracket_gradient_fd(&sphere(), &g, &h, &bg).unwrap();
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    for (a, b) in an.iter().zip(&fd) {
        assert!((a - b).abs() < 1e-6 * scale);
    }
    let bf = bracket_functional(&sphere(), &g, &h);
    assert_eq!(
        bf.evaluate(&bg).unwrap(),
        PeierlsContext::new(&sphere(), &bg)
            .unwrap()
            .bracket(&g, &h)
            .unwrap()
    );
}

#[test]
fn ideal_elements_vanish_on_shell() {
    let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
    let phi = FieldConfig::constant(lat.clone(), fixtures::sphere(), &[0.2, 0.1]).unwrap();
    let x = fixtures::random_bump_variation(&lat, 2, &mut rng(6), 1.0);
    let fi = onshell_ideal_element(&sphere(), VariationFamily::Fixed(x));
    assert_eq!(fi.evaluate(&phi).unwrap(), 0.0);
    let off = fixtures::random_sphere_background(lat, &mut rng(7)).unwrap();
    assert!(fi.evaluate(&off).unwrap().abs() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn bracket_is_antisymmetric_and_leibniz(seed in 0u64..10_000) {
        let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
        let mut r = rng(seed);
        let gl = sphere();
        let bg = fixtures::random_sphere_background(lat.clone(), &mut r).unwrap();
        let f = fixtures::random_builtin(&lat, 2, &gl, &mut r);
        let g = fixtures::random_builtin(&lat, 2, &gl, &mut r);
        let h = fixtures::random_builtin(&lat, 2, &gl, &mut r);
        let ctx = PeierlsContext::new(&gl, &bg).unwrap();
        let (fg, gf) = (ctx.bracket(&f, &g).unwrap(), ctx.bracket(&g, &f).unwrap());
        let scale = 1f64.max(ctx.retarded_product(&f, &g).unwrap().abs()).max(ctx.advanced_product(&f, &g).unwrap().abs());
        prop_assert!((fg + gf).abs() < 1e-12 * scale);
        let lhs = ctx.bracket(&f, &g.mul(&h)).unwrap();
        prop_assert!(leibniz_check(&gl, &f, &g, &h, &bg).unwrap() < 1e-10 * lhs.abs().max(1.0));
    }
}
