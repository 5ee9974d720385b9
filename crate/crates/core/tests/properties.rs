mod common;

use common::oracle::stage_value;
use prescriptor::linopt::{RowSense, VarKind};
use prescriptor::matrix::dot;
use prescriptor::model::StageTemplate;
use prescriptor::sddp::{benders_cut, integer_optimality_cut};
use prescriptor::weights::{knn_weights, Honesty, TrainingSet, WeightModels, WeightSpec};
use proptest::prelude::*;

fn points(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), n)
}

/// Stage with two binary decisions forwarded as state plus a costly slack.
fn two_bit_stage(cost: [f64; 2], w: [f64; 2], t: [f64; 2], h: f64) -> StageTemplate {
    let mut st = StageTemplate::new(1, 3, 2, 0);
    st.cost = vec![cost[0], cost[1], 5.0];
    st.upper = vec![1.0, 1.0, 100.0];
    st.integrality = vec![VarKind::Binary, VarKind::Binary, VarKind::Continuous];
    st.push_row(&[w[0], w[1], 1.0], RowSense::Ge, h, &t, &[]);
    st
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_support_is_k((pts, k) in (1usize..40).prop_flat_map(|n| (points(n, 2), 1..=n)), q in prop::collection::vec(-10.0..10.0f64, 2)) {
        let w = knn_weights(&q, &pts, k).unwrap();
        prop_assert_eq!(w.support_size(), k);
        prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forest_models_roundtrip_json(pts in (2usize..50).prop_flat_map(|n| points(n, 3)), seed in any::<u64>()) {
        let n = pts.len();
        let training = TrainingSet::new(
            pts.iter().map(|p| vec![p.clone()]).collect(),
            (0..n).map(|i| vec![vec![i as f64]]).collect(),
        ).unwrap();
        let spec = WeightSpec::Forest { trees: 4, k: Some(2), subsample: None, lambda: 0.2, pi: 1.0, honesty: Honesty::IgnoreResponse };
        let models = WeightModels::fit(&training, &[spec], seed).unwrap();
        let back: WeightModels = serde_json::from_str(&serde_json::to_string(&models).unwrap()).unwrap();
        prop_assert_eq!(&back, &models);
        let w = models.weights(1, &pts[0]).unwrap();
        prop_assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn integer_cut_is_tight_and_valid(
        cost in prop::array::uniform2(-2.0..3.0f64),
        w in prop::array::uniform2(-1.0..2.0f64),
        t in prop::array::uniform2(-2.0..2.0f64),
        h in -2.0..3.0f64,
        trial in 0u32..4,
    ) {
        let st = two_bit_stage(cost, w, t, h);
        let states: Vec<Vec<f64>> = (0..4u32).map(|b| vec![f64::from(b & 1), f64::from(b >> 1)]).collect();
        let values: Vec<f64> = states.iter().map(|s| stage_value(&st, Some(s), &[], &[], None).unwrap()).collect();
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
        let sj = &states[trial as usize];
        let cut = integer_optimality_cut(&st, sj, &[], None, lower).unwrap();
        prop_assert!((cut.beta + dot(&cut.pi, sj) - values[trial as usize]).abs() < 1e-6);
        for (s, v) in states.iter().zip(&values) {
            prop_assert!(cut.beta + dot(&cut.pi, s) <= v + 1e-6);
        }
    }

    #[test]
    fn benders_cut_is_a_minorant_of_the_relaxation(
        w in prop::array::uniform2(0.1..2.0f64),
        t in prop::array::uniform2(-2.0..2.0f64),
        h in -2.0..3.0f64,
        sj in prop::array::uniform2(0.0..1.0f64),
        s in prop::array::uniform2(0.0..1.0f64),
    ) {
        let mut st = two_bit_stage([1.0, 1.5], w, t, h);
        st.integrality = vec![VarKind::Continuous; 3];
        let cut = benders_cut(&st, &sj, &[], None).unwrap();
        let at_trial = stage_value(&st, Some(&sj), &[], &[], None).unwrap();
        let elsewhere = stage_value(&st, Some(&s), &[], &[], None).unwrap();
        prop_assert!((cut.beta + dot(&cut.pi, &sj) - at_trial).abs() < 1e-7);
        prop_assert!(cut.beta + dot(&cut.pi, &s) <= elsewhere + 1e-7);
    }
}
