mod support;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semg_core::dnn::{topology, Network, TrainConfig};
use semg_core::features::FeatureVector;
use semg_core::hierarchy::{evaluate_master_slave, train_conventional, train_master_slave};
use semg_core::lstm::{lstm_step, LstmParams, LstmState};
use semg_core::quantizer::{one_hot, QuantizerModel};
use semg_core::Gesture;
use support::fd::toy_data;

/// Clustered feature rows: one centre per gesture, Gaussian-ish spread.
fn clustered(subject: u32, reps: u32, d: usize, spread: f64, seed: u64) -> Vec<FeatureVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..10).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mut out = Vec::new();
    for g in Gesture::ALL {
        for r in 0..reps {
            out.push(FeatureVector {
                values: centres[g.index()].iter().map(|c| c + spread * rng.random_range(-1.0..1.0)).collect(),
                label: g.into(),
                subject_id: subject,
                repetition_index: r,
                synthetic: false,
            });
        }
    }
    out
}

fn quick(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn small_step_cost_never_increases() {
    let net = Network::<f64>::init(&[4, 6, 6, 3], 2).unwrap();
    let data = toy_data(12, 4, 3, 9);
    let cfg = TrainConfig {
        iterations: 200,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let initial = net.cost(&data, 0.0).unwrap();
    let (_, report) = net.train(&data, &cfg, None).unwrap();
    let costs: Vec<f64> = report.costs().collect();
    assert!(costs[0] <= initial);
    for w in costs.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn permuted_rows_give_identical_models() {
    let rows = clustered(1, 6, 5, 0.4, 1);
    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let cfg = quick(20);
    let (a, _) = train_master_slave(&rows, &cfg, None).unwrap();
    let (b, _) = train_master_slave(&shuffled, &cfg, None).unwrap();
    assert_eq!(a, b);
    let (a, _) = train_conventional(&rows, &cfg, None).unwrap();
    let (b, _) = train_conventional(&shuffled, &cfg, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn training_is_deterministic_per_seed() {
    let rows = clustered(2, 4, 4, 0.3, 6);
    let (a, ra) = train_master_slave(&rows, &quick(15), None).unwrap();
    let (b, rb) = train_master_slave(&rows, &quick(15), None).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.master.records, rb.master.records);
    let (c, _) = train_master_slave(&rows, &TrainConfig { seed: 6, ..quick(15) }, None).unwrap();
    assert_ne!(a.master, c.master);
}

#[test]
fn networks_follow_topology_rule() {
    let rows = clustered(1, 3, 36, 0.5, 2);
    let (ms, _) = train_master_slave(&rows, &quick(1), None).unwrap();
    assert_eq!(ms.master.layer_sizes(), [36, 54, 54, 54, 54, 2]);
    assert_eq!(ms.slave_static.layer_sizes(), [36, 54, 54, 54, 54, 5]);
    assert_eq!(ms.slave_dynamic.layer_sizes(), topology(36, 5).as_slice());
    let (flat, _) = train_conventional(&rows, &quick(1), None).unwrap();
    assert_eq!(flat.network.layer_sizes(), [36, 54, 54, 54, 54, 10]);
}

#[test]
fn routing_identity_holds_on_trained_models() {
    for seed in 0..4 {
        let rows = clustered(1, 8, 6, 1.2, seed);
        let (train, test): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| r.repetition_index < 5);
        let (model, _) = train_master_slave(&train, &quick(30), None).unwrap();
        let e = evaluate_master_slave(&model, &test).unwrap();
        for o in &e.outcomes {
            assert_eq!(o.end_to_end_correct, o.master_correct.unwrap() && o.slave_correct.unwrap());
            assert_eq!(o.predicted.gesture_type() == o.truth.gesture_type(), o.master_correct.unwrap());
        }
        assert!(e.end_to_end_ca() <= e.master_ca().unwrap());
    }
}

#[test]
fn master_and_flat_network_share_inputs() {
    let rows = clustered(3, 5, 7, 0.5, 4);
    let (ms, _) = train_master_slave(&rows, &quick(2), None).unwrap();
    let (flat, _) = train_conventional(&rows, &quick(2), None).unwrap();
    assert_eq!(ms.scaler, flat.scaler);
    for r in &rows {
        let a: Vec<u64> = ms.scaler.apply(&r.values).iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = flat.scaler.apply(&r.values).iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularization_only_adds_cost(seed in 0u64..1000, lambda in 0.0f64..2.0) {
        let net = Network::<f64>::init(&[3, 5, 2], seed).unwrap();
        let data = toy_data(4, 3, 2, seed + 1);
        prop_assert!(net.cost(&data, lambda).unwrap() >= net.cost(&data, 0.0).unwrap());
    }

    #[test]
    fn outputs_are_probabilities(seed in 0u64..1000, x in proptest::collection::vec(-50.0f64..50.0, 4)) {
        let net = Network::<f64>::init(&[4, 6, 6, 3], seed).unwrap();
        let (k, out) = net.predict(&x).unwrap();
        prop_assert!(k < 3);
        prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn lstm_gates_are_bounded(seed in 0u64..500, level in 0usize..6, steps in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = LstmParams::<f64>::random(6, 4, 3.0, &mut rng);
        let mut state = LstmState::zeros(4);
        for s in 0..steps {
            let t = lstm_step(&params, &state, &one_hot((level + s) % 6, 6).unwrap()).unwrap();
            for g in [&t.input_gate, &t.forget_gate, &t.output_gate] {
                prop_assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
            }
            prop_assert!(t.candidate.iter().all(|&v| v.abs() < 1.0));
            prop_assert!(t.next.h.iter().all(|&v| v.abs() < 1.0));
            state = t.next;
        }
    }

    #[test]
    fn quantizer_round_trip_within_half_bin(values in proptest::collection::vec(-1e4f64..1e4, 2..200), levels in 2usize..40) {
        let rows: Vec<FeatureVector<f64>> = values.iter().enumerate().map(|(i, &v)| FeatureVector {
            values: vec![v],
            label: Gesture::One.into(),
            subject_id: 0,
            repetition_index: i as u32,
            synthetic: false,
        }).collect();
        let q = QuantizerModel::fit(&rows, levels).unwrap();
        let half = q.bin_width(0) / 2.0;
        for &v in &values {
            let back = q.dequantize(q.quantize(v, 0), 0).unwrap();
            prop_assert!((back - v).abs() <= half * (1.0 + 1e-12));
            prop_assert_eq!(q.dequantize(q.quantize(back, 0), 0).unwrap(), back);
        }
    }
}
