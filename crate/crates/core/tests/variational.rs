use std::sync::Arc;

use peierls_lab::field::chart_backward;
use peierls_lab::field::FieldConfig;
use peierls_lab::geometry::TargetGeometry;
use peierls_lab::lattice::LorentzianLattice;
use peierls_lab::observables::{ActionFunctional, PointPolynomial};
use peierls_lab::scenario::converge;
use peierls_lab::scenario::fixtures::{self, rng};
use peierls_lab::variational::{
    directional_derivative_check, el_kernel, linearize, reconstruct_density, GeneralizedLagrangian,
};
use peierls_lab::wavemaps::bump_weights;
use proptest::prelude::*;

#[test]
fn builtin_lagrangians() {
    let flat = TargetGeometry::Flat { dim: 1 };
    assert!(GeneralizedLagrangian::builtin("free_scalar", &flat).is_ok());
    assert!(GeneralizedLagrangian::builtin("kg_mass(2.5)", &flat).is_ok());
    assert!(GeneralizedLagrangian::builtin("kg_mass(x)", &flat).is_err());
    assert!(
        GeneralizedLagrangian::builtin("wave_map", &TargetGeometry::Sphere2Stereographic).is_ok()
    );
    assert!(
        GeneralizedLagrangian::builtin("free_scalar", &TargetGeometry::Sphere2Stereographic)
            .is_err()
    );
}

#[test]
fn plane_wave_residual_is_second_order() {
    let t = converge::run(converge::Quantity::PlaneWaveResidual, &[32, 64, 128]).unwrap();
    assert!(t.min_rate().unwrap() > 1.9, "{:?}", t.rows);
}

#[test]
fn constant_maps_are_exact_solutions() {
    let t = converge::run(converge::Quantity::ConstantResidual, &[8, 16]).unwrap();
    assert!(t.exact);
    assert!(t.to_csv().contains("exact"));
}

#[test]
fn light_aligned_plane_wave_is_exact_in_the_interior() {
    // With dt = dx the leapfrog stencil has no dispersion error.
    let lat = Arc::new(LorentzianLattice::minkowski(17, 16, 0.125, 0.125).unwrap());
    let phi = fixtures::plane_wave(lat.clone(), 1.0, 1).unwrap();
    let e = el_kernel(&GeneralizedLagrangian::free_scalar(), &phi).unwrap();
    assert!(converge::interior_residual(&e, &lat) < 1e-12);
}

#[test]
fn normal_hyperbolicity_factors() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let phi = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[0.3]).unwrap();
    let nh = linearize(&GeneralizedLagrangian::kg_mass(1.0), &phi, &phi.target)
        .unwrap()
        .is_normally_hyperbolic(1e-12);
    assert_eq!(nh.factor(1e-12), Some(1.0));
    let bg = fixtures::random_sphere_background(lat, &mut rng(1)).unwrap();
    let gl = GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic);
    let nh = linearize(&gl, &bg, &bg.target)
        .unwrap()
        .is_normally_hyperbolic(1e-12);
    assert!((nh.factor(1e-12).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn reconstruction_of_action_functional() {
    let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
    let mut r = rng(5);
    let phi0 = fixtures::random_sphere_background(lat.clone(), &mut r).unwrap();
    let cutoff = bump_weights(&lat, 1, 0.4, 1.0, 0.3, &[1.0]);
    let f = ActionFunctional::functional(
        GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic),
        &lat,
        cutoff,
    );
    let x = fixtures::random_bump_variation(&lat, 2, &mut r, 0.1);
    let phi = chart_backward(&phi0, &x).unwrap();
    let theta = reconstruct_density(&f, &phi0, &phi).unwrap();
    let lhs = f.evaluate(&phi).unwrap() - f.evaluate(&phi0).unwrap();
    assert!((lhs - lat.integrate(&theta)).abs() < 1e-10);
    let q = PointPolynomial::quadratic(&lat, 2, bump_weights(&lat, 2, 0.4, 1.0, 0.3, &[1.0, 2.0]));
    let theta = reconstruct_density(&q, &phi0, &phi).unwrap();
    assert!(
        (q.evaluate(&phi).unwrap() - q.evaluate(&phi0).unwrap() - lat.integrate(&theta)).abs()
            < 1e-12
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn first_variation_matches_finite_differences(seed in 0u64..10_000) {
        let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
        let mut r = rng(seed);
        let gl = GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic);
        let phi = fixtures::random_sphere_background(lat.clone(), &mut r).unwrap();
        let x = fixtures::random_bump_variation(&lat, 2, &mut r, 0.2);
        let cutoff = vec![1.0; lat.n_sites()];
        let (a, n) = directional_derivative_check(&gl, &cutoff, &phi, &x).unwrap();
        prop_assert!((a - n).abs() < 1e-7 * (1.0 + a.abs()), "{} vs {}", a, n);
    }

    #[test]
    fn el_kernel_ignores_normalization(seed in 0u64..10_000) {
        let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
        let phi = fixtures::random_scalar_background(lat, &mut rng(seed)).unwrap();
        let a = el_kernel(&GeneralizedLagrangian::free_scalar(), &phi).unwrap();
        let b = el_kernel(&GeneralizedLagrangian::free_scalar().with_normalization(2.0), &phi).unwrap();
        for (x, y) in a.components.iter().zip(&b.components) {
            prop_assert!((x - y).abs() < 1e-14 * (1.0 + x.abs()));
        }
    }
}
