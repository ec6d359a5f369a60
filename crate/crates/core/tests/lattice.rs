use peierls_lab::lattice::{LorentzianLattice, SitePoint, SiteSet};
use peierls_lab::Error;
use proptest::prelude::*;

fn lat(n_t: usize, n_x: usize) -> LorentzianLattice {
    LorentzianLattice::minkowski(n_t, n_x, 0.5, 1.0).unwrap()
}

#[test]
fn cone_grows_one_cell_per_step() {
    let l = lat(8, 32);
    let fut = l.causal_future(SitePoint::new(2, 10));
    for it in 0..8 {
        let row: Vec<usize> = (0..32)
            .filter(|&ix| fut.contains(SitePoint::new(it, ix)))
            .collect();
        if it < 2 {
            assert!(row.is_empty());
        } else {
            let w = it - 2;
            assert_eq!(row.len(), 2 * w + 1, "row {it}");
            assert!(row.contains(&(10 - w)) && row.contains(&(10 + w)));
        }
    }
}

#[test]
fn cone_wraps_around_the_circle() {
    let l = lat(6, 8);
    let fut = l.causal_future(SitePoint::new(0, 0));
    assert!(fut.contains(SitePoint::new(1, 7)));
    assert!(fut.contains(SitePoint::new(2, 6)));
    assert!(!fut.contains(SitePoint::new(1, 6)));
    assert_eq!(l.wrap_x(-1), 7);
    assert_eq!(l.wrap_x(8), 0);
}

#[test]
fn courant_condition() {
    assert!(LorentzianLattice::minkowski(4, 4, 0.5, 1.0)
        .unwrap()
        .satisfies_cfl());
    assert!(LorentzianLattice::minkowski(4, 4, 1.0, 1.0)
        .unwrap()
        .satisfies_cfl());
    let fast = LorentzianLattice::minkowski(4, 4, 1.5, 1.0);
    assert!(fast.is_err() || !fast.unwrap().satisfies_cfl());
}

#[test]
fn rejects_degenerate_lattices() {
    assert!(LorentzianLattice::minkowski(0, 4, 0.5, 1.0).is_err());
    assert!(LorentzianLattice::minkowski(4, 4, -0.5, 1.0).is_err());
    assert!(
        LorentzianLattice::with_metric(4, 2, 0.5, 1.0, vec![1.0, 1.0], vec![1.0, 1.0]).is_err()
    );
}

#[test]
fn disjointness_needs_nonempty_sets() {
    let l = lat(4, 8);
    let e = SiteSet::empty(&l);
    let a = SiteSet::from_points(&l, &[SitePoint::new(1, 1)]);
    assert!(matches!(
        l.causally_disjoint(&e, &a),
        Err(Error::EmptySupport)
    ));
}

#[test]
fn spacelike_points_are_disjoint_timelike_are_not() {
    let l = lat(8, 32);
    let a = SiteSet::from_points(&l, &[SitePoint::new(4, 4)]);
    let b = SiteSet::from_points(&l, &[SitePoint::new(4, 12)]);
    let c = SiteSet::from_points(&l, &[SitePoint::new(6, 5)]);
    assert!(l.causally_disjoint(&a, &b).unwrap());
    assert!(!l.causally_disjoint(&a, &c).unwrap());
}

#[test]
fn integrate_uses_volume_weights() {
    let l = LorentzianLattice::minkowski(3, 4, 0.25, 0.5).unwrap();
    let ones = vec![1.0; l.n_sites()];
    let total: f64 = l.vol_weights().iter().sum();
    assert!((l.integrate(&ones) - total).abs() < 1e-15);
}

proptest! {
    #[test]
    fn future_and_past_are_dual(t1 in 0usize..10, x1 in 0usize..16, t2 in 0usize..10, x2 in 0usize..16) {
        let l = lat(10, 16);
        let (p, q) = (SitePoint::new(t1, x1), SitePoint::new(t2, x2));
        prop_assert_eq!(l.causal_future(p).contains(q), l.causal_past(q).contains(p));
    }

    #[test]
    fn hull_contains_the_set(pts in proptest::collection::vec((0usize..10, 0usize..16), 1..5)) {
        let l = lat(10, 16);
        let set = SiteSet::from_points(&l, &pts.iter().map(|&(t, x)| SitePoint::new(t, x)).collect::<Vec<_>>());
        prop_assert!(set.is_subset(&l.causal_hull(&set)));
        prop_assert!(set.is_subset(&set.dilate(1)));
    }

    #[test]
    fn set_algebra(a in proptest::collection::vec(any::<bool>(), 40), b in proptest::collection::vec(any::<bool>(), 40)) {
        let l = lat(4, 10);
        let (sa, sb) = (SiteSet::from_mask(&l, a), SiteSet::from_mask(&l, b));
        prop_assert_eq!(sa.union(&sb).len() + sa.intersection(&sb).len(), sa.len() + sb.len());
        prop_assert_eq!(sa.complement().len(), l.n_sites() - sa.len());
        prop_assert_eq!(sa.intersects(&sb), !sa.intersection(&sb).is_empty());
    }
}
