use std::sync::Arc;

use peierls_lab::field::FieldConfig;
use peierls_lab::geometry::TargetGeometry;
use peierls_lab::green::{h_independence, solve_via_fiber_metric, GreenKind, GreenOperator};
use peierls_lab::lattice::SitePoint;
use peierls_lab::scenario::converge;
use peierls_lab::scenario::fixtures::{self, rng};
use peierls_lab::variational::{linearize, GeneralizedLagrangian};
use peierls_lab::Error;
use proptest::prelude::*;

fn free_green(n_t: usize, n_x: usize) -> GreenOperator {
    let lat = fixtures::half_courant(n_t, n_x, 2.0).unwrap();
    let phi = FieldConfig::constant(lat, fixtures::flat(1), &[0.0]).unwrap();
    let op = linearize(&GeneralizedLagrangian::free_scalar(), &phi, &phi.target).unwrap();
    GreenOperator::new(Arc::new(op), GreenKind::Retarded).unwrap()
}

fn sphere_green(seed: u64) -> GreenOperator {
    let lat = fixtures::half_courant(13, 12, 2.0).unwrap();
    let bg = fixtures::random_sphere_background(lat, &mut rng(seed)).unwrap();
    let gl = GeneralizedLagrangian::wave_map(TargetGeometry::Sphere2Stereographic);
    let op = linearize(&gl, &bg, &bg.target).unwrap();
    GreenOperator::new(Arc::new(op), GreenKind::Retarded).unwrap()
}

#[test]
fn unit_source_gives_half_step_function() {
    let g = free_green(40, 64);
    let lat = g.op.lattice().clone();
    let mut e = vec![0.0; lat.n_sites()];
    e[lat.site(SitePoint::new(0, 32))] = 1.0;
    let r = g.apply_raw(&e).unwrap();
    // Well inside the cone the discrete kernel oscillates around 1/2.
    let mean: f64 = (20..40)
        .map(|it| r[lat.site(SitePoint::new(it, 32))])
        .sum::<f64>()
        / 20.0;
    assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    assert_eq!(r[lat.site(SitePoint::new(10, 50))], 0.0);
}

#[test]
fn retarded_kernel_error_decreases() {
    let a = converge::retarded_kernel_error(50).unwrap();
    let b = converge::retarded_kernel_error(100).unwrap();
    assert!(b.binned < a.binned && b.binned < 0.05);
}

#[test]
fn causal_kernel_is_antisymmetric() {
    let g = free_green(12, 12).with_kind(GreenKind::Causal);
    let dim = 144;
    let m = g.dense_kernel(dim).unwrap();
    for i in 0..dim {
        for j in 0..dim {
            assert!((m[i * dim + j] + m[j * dim + i]).abs() < 1e-13);
        }
    }
}

#[test]
fn dense_assembly_is_bounded() {
    let g = free_green(12, 12);
    assert!(matches!(
        g.dense_kernel(100),
        Err(Error::DenseTooLarge { .. })
    ));
}

#[test]
fn fiber_metric_does_not_matter() {
    let g = sphere_green(4);
    let src = fixtures::random_vector(&mut rng(9), g.op.base.values.len());
    let flat = TargetGeometry::Flat { dim: 2 };
    for kind in [GreenKind::Retarded, GreenKind::Advanced] {
        let d = h_independence(
            &g.op,
            &TargetGeometry::Sphere2Stereographic,
            &flat,
            &src,
            kind,
        )
        .unwrap();
        assert!(d < 1e-10, "{kind:?}: {d}");
        let a = solve_via_fiber_metric(&g.op, &src, kind).unwrap();
        let b = g.with_kind(kind).apply(&src).unwrap();
        let diff = a
            .components
            .iter()
            .zip(&b.components)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn retarded_and_advanced_are_adjoint(seed in 0u64..10_000) {
        let g = sphere_green(seed);
        let mut r = rng(seed + 1);
        let dim = g.op.base.values.len();
        let (u, v) = (fixtures::random_vector(&mut r, dim), fixtures::random_vector(&mut r, dim));
        let a: f64 = g.apply_raw(&u).unwrap().iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&g.with_kind(GreenKind::Advanced).apply_raw(&v).unwrap()).map(|(x, y)| x * y).sum();
        prop_assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()));
    }

    #[test]
    fn responses_stay_in_the_cone(it in 0usize..13, ix in 0usize..12, comp in 0usize..2, seed in 0u64..100) {
        let g = sphere_green(seed);
        let lat = g.op.lattice().clone();
        let p = SitePoint::new(it, ix);
        let mut e = vec![0.0; lat.n_sites() * 2];
        e[lat.site(p) * 2 + comp] = 1.0;
        let ret = g.apply_raw(&e).unwrap();
        let adv = g.with_kind(GreenKind::Advanced).apply_raw(&e).unwrap();
        let (fut, past) = (lat.causal_future(p), lat.causal_past(p));
        for s in 0..lat.n_sites() {
            for i in 0..2 {
                if !fut.contains_index(s) { prop_assert_eq!(ret[s * 2 + i], 0.0); }
                if !past.contains_index(s) { prop_assert_eq!(adv[s * 2 + i], 0.0); }
            }
        }
    }
}
