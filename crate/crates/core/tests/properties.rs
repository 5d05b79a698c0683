use std::sync::Arc;

use proptest::prelude::*;
use roughdrift::drift::{catalog, mollify, ZeroRandom};
use roughdrift::flow::FlowPath;
use roughdrift::localtime::{lt_via_decomposition, lt_via_derivative, SpaceTimeIntegrand};
use roughdrift::malliavin::{
    haar_apply, haar_forward, haar_inverse, malliavin_fd_oracle, MalliavinPath,
};
use roughdrift::paths::{reverse_path, sample_brownian};
use roughdrift::sde::SdeProblem;
use roughdrift::stats::pairwise_sum;
use roughdrift::{StreamId, TimeGrid};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn haar_round_trip(values in prop::collection::vec(-10.0f64..10.0, 64)) {
        let back = haar_inverse(&haar_forward(&values).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_operator_is_linear(f in prop::collection::vec(-1.0f64..1.0, 32), g in prop::collection::vec(-1.0f64..1.0, 32), c in -3.0f64..3.0) {
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + c * b).collect();
        let lhs = haar_apply(&combo, 0.2).unwrap();
        let (af, ag) = (haar_apply(&f, 0.2).unwrap(), haar_apply(&g, 0.2).unwrap());
        for m in 0..32 {
            prop_assert!((lhs[m] - (af[m] + c * ag[m])).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive(xs in prop::collection::vec(-1e3f64..1e3, 0..300)) {
        let naive: f64 = xs.iter().sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-9 * (1.0 + naive.abs()));
    }

    #[test]
    fn flow_cocycle(seed in 0u64..1000, split in 1usize..199, x in -2.0f64..2.0) {
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let p = SdeProblem::new(catalog::sine(1.5), Arc::new(catalog::tanh_shifted_noise()), vec![1.0], x, grid).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(seed, 0)).unwrap();
        let b2 = p.drift2.realize(&path);
        let f = FlowPath::new(&p, &path, b2.as_ref(), 0, x, 0).unwrap();
        let tail = FlowPath::new(&p, &path, b2.as_ref(), split, f.value(split), 0).unwrap();
        let whole = f.derivative(200);
        prop_assert!(whole > 0.0);
        prop_assert!((f.derivative(split) * tail.derivative(200) - whole).abs() < 1e-12 * whole);
    }

    // t < s: on the diagonal the explicit value is the right limit σ
    #[test]
    fn malliavin_matches_oracle_on_random_pairs(seed in 0u64..1000, j in 0usize..400, len in 1usize..400) {
        let grid = TimeGrid::new(0.0, 1.0, 800).unwrap();
        let p = SdeProblem::new(mollify(&catalog::sine(1.0), 20), Arc::new(catalog::tanh_noise()), vec![1.0], 0.1, grid).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(seed, 1)).unwrap();
        let k = j + len;
        let explicit = MalliavinPath::new(&p, &path, 0).unwrap().derivative(j, k, 0);
        let fd = malliavin_fd_oracle(&p, &path, j, k, 0, 1e-4).unwrap();
        prop_assert!((explicit - fd).abs() <= 1e-2 * explicit.abs());
    }

    #[test]
    fn localtime_routes_are_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = TimeGrid::new(0.0, 1.0, 500).unwrap();
        let path = sample_brownian(grid, 1, StreamId::new(seed, 2)).unwrap();
        let rev = reverse_path(&path);
        let states: Vec<f64> = path.component(0);
        let (f, g) = (SpaceTimeIntegrand::half_square(), SpaceTimeIntegrand::identity());
        let h = f.scaled(a).plus(&g.scaled(b));
        let dec = |q: &SpaceTimeIntegrand| lt_via_decomposition(q, 0.0, &rev, 0, 500).unwrap().value;
        let der = |q: &SpaceTimeIntegrand| lt_via_derivative(q, &states, &grid, 0, 500).unwrap().value;
        prop_assert!((dec(&h) - a * dec(&f) - b * dec(&g)).abs() < 1e-10);
        prop_assert!((der(&h) - a * der(&f) - b * der(&g)).abs() < 1e-10);
    }
}

#[test]
fn zero_drift_flow_is_translation() {
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let p = SdeProblem::new(catalog::zero(), Arc::new(ZeroRandom), vec![2.0], 0.0, grid).unwrap();
    let path = sample_brownian(grid, 1, StreamId::new(9, 9)).unwrap();
    let b2 = p.drift2.realize(&path);
    let f = FlowPath::new(&p, &path, b2.as_ref(), 0, 1.5, 0).unwrap();
    for k in 0..=100 {
        assert!((f.value(k) - (1.5 + 2.0 * path.value(k, 0))).abs() < 1e-12);
        assert_eq!(f.derivative(k), 1.0);
    }
}
