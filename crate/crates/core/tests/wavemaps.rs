use peierls_lab::geometry::TargetGeometry;
use peierls_lab::scenario::fixtures::{self, rng};
use peierls_lab::wavemaps::{
    a_coefficient_check, curvature_term, flat_energy, generic_el, preset_lattice,
    run_wavemap_scenario, wave_map_el, wave_map_el_pointwise, WaveMapModel, PRESETS,
};
use proptest::prelude::*;

#[test]
fn presets_pass() {
    for p in PRESETS {
        let rep = run_wavemap_scenario(p, 2).unwrap();
        assert!(rep.passed, "{p}: {:?}", rep.rows);
        assert_eq!(rep.rows.len(), 2);
    }
    assert!(run_wavemap_scenario("no-such-preset", 1).is_err());
}

#[test]
fn preset_lattices_nest() {
    let a = preset_lattice(16, 0).unwrap();
    let b = preset_lattice(16, 1).unwrap();
    assert_eq!(b.n_x, 2 * a.n_x);
    assert!((a.dt - 2.0 * b.dt).abs() < 1e-15);
    assert!((fixtures::duration(&a) - fixtures::duration(&b)).abs() < 1e-12);
}

#[test]
fn flat_target_has_no_curvature_term() {
    let lat = fixtures::half_courant(9, 8, 2.0).unwrap();
    let model = WaveMapModel::new(lat.clone(), TargetGeometry::Flat { dim: 2 });
    let phi = model
        .field(|t, x| vec![(x - t).sin(), 0.3 * (x + t).cos()])
        .unwrap();
    assert!(curvature_term(&model, &phi)
        .unwrap()
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn flat_energy_is_nearly_conserved() {
    let lat = fixtures::half_courant(65, 64, 2.0).unwrap();
    let model = WaveMapModel::new(lat, TargetGeometry::Flat { dim: 1 });
    let k = std::f64::consts::PI;
    let phi = model.field(|t, x| vec![(k * (x - t)).sin()]).unwrap();
    let e = flat_energy(&phi);
    let (lo, hi) = e
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!((hi - lo) / hi < 1e-2);
}

fn pointwise_gap(n: usize) -> f64 {
    let lat = fixtures::half_courant(n + 1, n, 2.0).unwrap();
    let model = WaveMapModel::new(lat.clone(), TargetGeometry::Sphere2Stereographic);
    let k = std::f64::consts::PI;
    let phi = model
        .field(|t, x| vec![0.4 * (k * x).sin() + 0.2 * t, 0.3 * (k * (x + t)).cos()])
        .unwrap();
    let a = wave_map_el(&model, &phi).unwrap();
    let p = wave_map_el_pointwise(&model, &phi).unwrap();
    let mut worst: f64 = 0.0;
    for s in 0..lat.n_sites() {
        if a.is_boundary_row(s / lat.n_x) {
            continue;
        }
        for i in 0..2 {
            worst = worst
                .max((a.components[s * 2 + i] - p.components[s * 2 + i]).abs() / lat.vol_weight(s));
        }
    }
    worst
}

#[test]
fn pointwise_el_converges_to_the_variational_one() {
    let (coarse, fine) = (pointwise_gap(32), pointwise_gap(64));
    assert!(fine < coarse / 3.0, "{coarse} -> {fine}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn specialized_el_agrees_with_generic(seed in 0u64..10_000) {
        let lat = fixtures::half_courant(17, 16, 2.0).unwrap();
        let bg = fixtures::random_sphere_background(lat.clone(), &mut rng(seed)).unwrap();
        let model = WaveMapModel::new(lat.clone(), TargetGeometry::Sphere2Stereographic);
        let a = wave_map_el(&model, &bg).unwrap();
        let b = generic_el(&model, &bg).unwrap();
        for (x, y) in a.components.iter().zip(&b.components) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let (anti, size) = a_coefficient_check(&model, &bg).unwrap();
        prop_assert!(anti <= 1e-12 * size.max(1.0));
    }
}
