use proptest::prelude::*;

use vortlab::fields::AtomicMeasure;
use vortlab::kr_ot::{kr_distance, ConcaveCost, Solver};

fn measure(pts: &[(f64, f64)]) -> AtomicMeasure {
    AtomicMeasure::new(pts.iter().map(|&(x, y)| [x, y]).collect(), vec![1.0; pts.len()]).unwrap()
}

fn dist(a: &AtomicMeasure, b: &AtomicMeasure, c: ConcaveCost) -> f64 {
    kr_distance(a, b, c, Solver::ExactLp).unwrap().value
}

fn costs() -> impl Strategy<Value = ConcaveCost> {
    prop_oneof![
        Just(ConcaveCost::Tanh),
        (-3.0f64..0.0).prop_map(|e| ConcaveCost::log_delta(10f64.powf(e)).unwrap()),
    ]
}

fn cloud(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(
        (x, y, z) in (1usize..6).prop_flat_map(|n| (cloud(n), cloud(n), cloud(n))),
        c in costs(),
    ) {
        let (x, y, z) = (measure(&x), measure(&y), measure(&z));
        let (xy, yx) = (dist(&x, &y, c), dist(&y, &x, c));
        let (xz, zy) = (dist(&x, &z, c), dist(&z, &y, c));
        prop_assert!(dist(&x, &x, c).abs() < 1e-12);
        prop_assert!((xy - yx).abs() <= 1e-10 * xy.max(1.0));
        prop_assert!(xy <= xz + zy + 1e-10 * (xz + zy).max(1.0));
        prop_assert!(xy >= 0.0);
    }

    #[test]
    fn translation_invariant(pts in cloud(4), other in cloud(4), shift in (-0.5f64..0.5, -0.5f64..0.5)) {
        let c = ConcaveCost::log_delta(0.05).unwrap();
        let moved = |p: &[(f64, f64)]| p.iter().map(|&(x, y)| (x + shift.0, y + shift.1)).collect::<Vec<_>>();
        let a = dist(&measure(&pts), &measure(&other), c);
        let b = dist(&measure(&moved(&pts)), &measure(&moved(&other)), c);
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }
}
