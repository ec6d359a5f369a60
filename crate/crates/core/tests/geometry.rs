use approx::assert_relative_eq;
use peierls_lab::geometry::{TargetGeometry, DEFAULT_GEODESIC_STEPS};
use proptest::prelude::*;

const SPHERE: TargetGeometry = TargetGeometry::Sphere2Stereographic;

#[test]
fn builtin_names() {
    assert_eq!(
        TargetGeometry::builtin("flat", 3).unwrap(),
        TargetGeometry::Flat { dim: 3 }
    );
    assert_eq!(TargetGeometry::builtin("sphere2", 2).unwrap(), SPHERE);
    assert!(TargetGeometry::builtin("torus", 2).is_err());
    assert!(TargetGeometry::builtin("flat", 0).is_err());
}

#[test]
fn sphere_metric_and_curvature() {
    let h = SPHERE.metric(&[0.0, 0.0]);
    assert_relative_eq!(h[0], 4.0);
    assert_relative_eq!(h[1], 0.0);
    for y in [[0.0, 0.0], [0.3, -0.7], [1.5, 2.0]] {
        assert_relative_eq!(SPHERE.sectional_curvature(&y), 1.0, epsilon = 1e-10);
    }
    assert_eq!(
        TargetGeometry::Flat { dim: 2 }.christoffel(&[0.3, 0.1]),
        vec![0.0; 8]
    );
}

#[test]
fn quarter_great_circle() {
    // From the south pole, a unit-speed geodesic of length pi/2 reaches the equator |y| = 1.
    let v = [std::f64::consts::FRAC_PI_2 / 2.0, 0.0];
    let y = SPHERE.exp_map(&[0.0, 0.0], &v, 256).unwrap();
    assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
    assert_relative_eq!(y[1], 0.0, epsilon = 1e-12);
}

#[test]
fn flat_exp_is_translation() {
    let flat = TargetGeometry::Flat { dim: 2 };
    assert_eq!(
        flat.exp_map(&[1.0, 2.0], &[0.5, -1.0], 1).unwrap(),
        vec![1.5, 1.0]
    );
    assert_eq!(
        flat.exp_inverse(&[1.0, 2.0], &[1.5, 1.0], 1e-14).unwrap(),
        vec![0.5, -1.0]
    );
}

proptest! {
    #[test]
    fn shooting_inverts_exp(b0 in -1.0f64..1.0, b1 in -1.0f64..1.0, v0 in -0.4f64..0.4, v1 in -0.4f64..0.4) {
        let base = [b0, b1];
        let y = SPHERE.exp_map(&base, &[v0, v1], DEFAULT_GEODESIC_STEPS).unwrap();
        let w = SPHERE.exp_inverse(&base, &y, 1e-13).unwrap();
        prop_assert!((w[0] - v0).abs() < 1e-8 && (w[1] - v1).abs() < 1e-8, "{:?} vs {:?}", w, [v0, v1]);
    }

    #[test]
    fn geodesics_preserve_speed(b0 in -1.0f64..1.0, b1 in -1.0f64..1.0, v0 in -0.5f64..0.5, v1 in -0.5f64..0.5) {
        let base = [b0, b1];
        let (y, u) = SPHERE.exp_map_with_velocity(&base, &[v0, v1], DEFAULT_GEODESIC_STEPS).unwrap();
        let s0 = SPHERE.norm(&base, &[v0, v1]);
        prop_assert!((SPHERE.norm(&y, &u) - s0).abs() < 1e-9 * (1.0 + s0));
    }
}
