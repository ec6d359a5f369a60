use std::sync::Arc;

use peierls_lab::field::{chart_backward, FieldConfig, Variation};
use peierls_lab::geometry::TargetGeometry;
use peierls_lab::observables::{
    additivity_test, classify, global_additivity_test, smooth_compose, ActionFunctional, Affine,
    ChiStep, Exp1MinusChiSq, Functional, FunctionalClass, PointPolynomial, Product, SupFunctional,
};
use peierls_lab::scenario::fixtures::{self, rng};
use peierls_lab::variational::GeneralizedLagrangian;
use peierls_lab::wavemaps::{bump_weights, window};
use proptest::prelude::*;

#[test]
fn chi_is_a_smooth_step() {
    let chi = ChiStep;
    assert_eq!(chi.eval(0.0)[0], 1.0);
    assert_eq!(chi.eval(0.5)[0], 1.0);
    assert_eq!(chi.eval(-0.5)[0], 1.0);
    assert_eq!(chi.eval(1.0)[0], 0.0);
    assert_eq!(chi.eval(2.0)[0], 0.0);
    let mid = chi.eval(0.75)[0];
    assert!(mid > 0.0 && mid < 1.0);
}

#[test]
fn point_polynomial_values() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let phi = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[2.0]).unwrap();
    let w = vec![1.0; lat.n_sites()];
    let vol: f64 = lat.vol_weights().iter().sum();
    let lin = PointPolynomial::linear(&lat, 1, w.clone());
    let cub = PointPolynomial::polynomial(&lat, 1, w, [1.0, 1.0, 1.0]);
    assert!((lin.evaluate(&phi).unwrap() - 2.0 * vol).abs() < 1e-12);
    assert!((cub.evaluate(&phi).unwrap() - 14.0 * vol).abs() < 1e-11);
}

#[test]
fn algebra_of_functionals() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let phi = fixtures::random_scalar_background(lat.clone(), &mut rng(2)).unwrap();
    let f = PointPolynomial::linear(&lat, 1, bump_weights(&lat, 1, 0.5, 1.0, 0.4, &[1.0]));
    let g = PointPolynomial::quadratic(&lat, 1, bump_weights(&lat, 1, 0.5, 1.0, 0.4, &[2.0]));
    let (fv, gv) = (f.evaluate(&phi).unwrap(), g.evaluate(&phi).unwrap());
    assert!((f.add(&g).evaluate(&phi).unwrap() - (fv + gv)).abs() < 1e-14);
    assert!((f.mul(&g).evaluate(&phi).unwrap() - fv * gv).abs() < 1e-14);
    assert!((f.scale(3.0).evaluate(&phi).unwrap() - 3.0 * fv).abs() < 1e-14);
    assert_eq!(Functional::constant(2.5).evaluate(&phi).unwrap(), 2.5);
    let aff = smooth_compose(
        Arc::new(Affine {
            c0: 1.0,
            coeffs: vec![2.0, -1.0],
        }),
        &[f.clone(), g.clone()],
    );
    assert!((aff.evaluate(&phi).unwrap() - (1.0 + 2.0 * fv - gv)).abs() < 1e-13);
    let prod = smooth_compose(Arc::new(Product), &[f, g]);
    assert!((prod.evaluate(&phi).unwrap() - fv * gv).abs() < 1e-14);
}

#[test]
fn classification_of_builtins() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let mut r = rng(8);
    let samples: Vec<FieldConfig> = (0..2)
        .map(|_| fixtures::random_scalar_background(lat.clone(), &mut r).unwrap())
        .collect();
    let q = PointPolynomial::quadratic(&lat, 1, bump_weights(&lat, 1, 0.5, 1.0, 0.4, &[1.0]));
    let rep = classify(&q, &samples).unwrap();
    assert!(rep.local && rep.regular);
    assert_eq!(rep.tag, FunctionalClass::Microlocal);
    let sup = SupFunctional::functional(window(&lat, (0.2, 0.6), (0.5, 1.5)));
    assert!(!classify(&sup, &samples).unwrap().local);
}

#[test]
fn composite_of_smeared_field_is_not_additive() {
    let lat = fixtures::half_courant(33, 32, 2.0).unwrap();
    let phi0 = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[0.0]).unwrap();
    let w = bump_weights(&lat, 1, 0.5, 1.0, 0.5, &[1.0]);
    let smear =
        |v: &[f64]| lat.integrate(&v.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>());
    let lift = |x0: f64| {
        let b = bump_weights(&lat, 1, 0.5, x0, 0.15, &[1.0]);
        let c = 0.45 / smear(&b);
        Variation::from_vec(&lat, 1, b.iter().map(|v| c * v).collect())
    };
    let f = smooth_compose(
        Arc::new(Exp1MinusChiSq),
        &[PointPolynomial::linear(&lat, 1, w.clone())],
    );
    let rep = additivity_test(&f, &phi0, &lift(0.75), &lift(1.25)).unwrap();
    assert!(!rep.passed);
    assert!((rep.lhs - rep.rhs).abs() > 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn local_functionals_are_additive(seed in 0u64..10_000) {
        let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
        let mut r = rng(seed);
        let gl = GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic);
        let phi0 = fixtures::random_sphere_background(lat.clone(), &mut r).unwrap();
        let f = fixtures::random_builtin(&lat, 2, &gl, &mut r);
        let cutoff = bump_weights(&lat, 1, 0.5, 1.0, 0.45, &[1.0]);
        let a = ActionFunctional::functional(gl, &lat, cutoff);
        let (x1, xm1) = fixtures::disjoint_pair(&lat, 2, &mut r, 0.1, 2);
        let phi1 = chart_backward(&phi0, &x1).unwrap();
        let phim1 = chart_backward(&phi0, &xm1).unwrap();
        for func in [&f, &a] {
            prop_assert!(additivity_test(func, &phi0, &x1, &xm1).unwrap().passed);
            let g = global_additivity_test(func, &phi1, &phi0, &phim1).unwrap();
            prop_assert!(g.passed, "{} vs {}", g.lhs, g.rhs);
        }
    }
}
