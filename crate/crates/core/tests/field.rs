use std::sync::Arc;

use peierls_lab::field::{
    chart_backward, chart_forward, glue_sections, interpolate_sections, relative_support,
    FieldConfig, Variation,
};
use peierls_lab::geometry::TargetGeometry;
use peierls_lab::lattice::LorentzianLattice;
use peierls_lab::scenario::fixtures::{self, rng};
use peierls_lab::Error;
use proptest::prelude::*;

fn small() -> Arc<LorentzianLattice> {
    fixtures::half_courant(9, 8, 2.0).unwrap()
}

#[test]
fn constructors_check_shapes() {
    let lat = small();
    assert!(FieldConfig::new(lat.clone(), fixtures::sphere(), vec![0.0; 10]).is_err());
    let phi = FieldConfig::constant(lat.clone(), fixtures::sphere(), &[0.1, 0.2]).unwrap();
    assert_eq!(phi.n(), 2);
    assert_eq!(phi.value(5), &[0.1, 0.2]);
    let psi = FieldConfig::from_fn(lat, fixtures::flat(1), |t, x| vec![t + x]).unwrap();
    assert_eq!(psi.value(0), &[0.0]);
}

#[test]
fn flat_chart_is_subtraction() {
    let lat = small();
    let phi = fixtures::plane_wave(lat.clone(), 0.5, 1).unwrap();
    let x = Variation::from_vec(
        &lat,
        1,
        (0..lat.n_sites()).map(|s| 0.01 * s as f64).collect(),
    );
    let psi = chart_backward(&phi, &x).unwrap();
    let back = chart_forward(&phi, &psi).unwrap();
    for (a, b) in back.components.iter().zip(&x.components) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn gluing_keeps_each_piece() {
    let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
    let mut r = rng(3);
    let phi0 = fixtures::random_sphere_background(lat.clone(), &mut r).unwrap();
    let (x1, xm1) = fixtures::disjoint_pair(&lat, 2, &mut r, 0.1, 2);
    let phi1 = chart_backward(&phi0, &x1).unwrap();
    let phim1 = chart_backward(&phi0, &xm1).unwrap();
    let glued = glue_sections(&phi0, &phi1, &phim1).unwrap();
    let s1 = relative_support(&phi0, &phi1).unwrap();
    for s in 0..lat.n_sites() {
        let expect = if s1.contains_index(s) {
            phi1.value(s)
        } else if xm1.support(&lat).contains_index(s) {
            phim1.value(s)
        } else {
            phi0.value(s)
        };
        assert_eq!(glued.value(s), expect);
    }
    let interp = interpolate_sections(&phi0, &phi1, &phim1).unwrap();
    assert_eq!(interp.glued.values, glued.values);
    // Flows along disjoint supports commute.
    for (a, b) in interp.flows_xy.values.iter().zip(&interp.flows_yx.values) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn gluing_rejects_overlapping_supports() {
    let lat = small();
    let phi0 = FieldConfig::constant(lat.clone(), fixtures::flat(1), &[0.0]).unwrap();
    let mut v = vec![0.0; lat.n_sites()];
    v[10] = 1.0;
    let phi1 = phi0.with_values(v.clone()).unwrap();
    assert!(matches!(
        glue_sections(&phi0, &phi1, &phi1),
        Err(Error::SupportsNotDisjoint)
    ));
}

proptest! {
    #[test]
    fn sphere_chart_round_trip(seed in 0u64..1000, amp in 0.01f64..0.5) {
        let lat = small();
        let mut r = rng(seed);
        let phi = fixtures::random_sphere_background(lat.clone(), &mut r).unwrap();
        let x = fixtures::random_bump_variation(&lat, 2, &mut r, amp);
        let psi = chart_backward(&phi, &x).unwrap();
        let back = chart_forward(&phi, &psi).unwrap();
        let err = back.components.iter().zip(&x.components).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err < 1e-9, "round trip error {}", err);
        prop_assert!(relative_support(&phi, &psi).unwrap().is_subset(&x.support(&lat)));
    }

    #[test]
    fn variation_algebra(a in proptest::collection::vec(-1.0f64..1.0, 72), c in -2.0f64..2.0) {
        let lat = small();
        let x = Variation::from_vec(&lat, 1, a.clone());
        let y = x.scaled(c);
        let z = x.add(&y);
        for (zk, ak) in z.components.iter().zip(&a) {
            prop_assert!((zk - (1.0 + c) * ak).abs() < 1e-14);
        }
        prop_assert!((x.pair(&a) - a.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-12);
    }
}

#[test]
fn sphere_target_is_two_dimensional() {
    assert_eq!(TargetGeometry::Sphere2Stereographic.dim(), 2);
}
