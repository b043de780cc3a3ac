use lowbody_core::circuit::{build_layout, QcnnLayout};
use lowbody_core::learn::{predict_multiclass, QcnnModel};
use lowbody_core::optim::{minimize, LbfgsOptions};
use lowbody_core::purity::{pgate_apply, purities_network, IsState};
use lowbody_core::rng::derive_seed;
use lowbody_core::shadows::ShadowRecord;
use lowbody_core::{
    build_qcnn, propagate, readout_observables, LayoutStyle, Pauli, PauliString, PauliSum, StateVector, Task,
    TruncationPolicy,
};
use proptest::prelude::*;

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(0u8..4, n).prop_map(move |v| {
        let sites: Vec<(usize, Pauli)> =
            v.iter().enumerate().map(|(q, &p)| (q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][p as usize])).collect();
        PauliString::from_sites(sites.len(), &sites).unwrap()
    })
}

fn brick_params(n: usize) -> usize {
    build_qcnn(n, LayoutStyle::Brick).unwrap().0.num_params()
}

fn angles(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-std::f64::consts::PI..std::f64::consts::PI, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn text_round_trip(p in pauli_string(70)) {
        let back: PauliString = p.to_text().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn products_agree_up_to_phase(a in pauli_string(9), b in pauli_string(9)) {
        let (pab, ab) = a.multiply(&b).unwrap();
        let (pba, ba) = b.multiply(&a).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(pab == pba, a.commutes(&b).unwrap());
        prop_assert_eq!(a.multiply(&a).unwrap().1, PauliString::identity(9));
    }

    #[test]
    fn products_match_dense_action(a in pauli_string(4), b in pauli_string(4), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sv = StateVector::random_product(4, &mut rng).unwrap();
        let (phase, ab) = a.multiply(&b).unwrap();
        let lhs = sv.apply_pauli(&b).unwrap().apply_pauli(&a).unwrap();
        let rhs = sv.apply_pauli(&ab).unwrap();
        let (re, im) = phase.value();
        let ph = num_complex::Complex64::new(re, im);
        for (x, y) in lhs.amplitudes().iter().zip(rhs.amplitudes()) {
            prop_assert!((x - ph * y).norm() < 1e-12);
        }
    }

    #[test]
    fn untruncated_propagation_preserves_norm(theta in angles(brick_params(4))) {
        let (circuit, layout) = build_qcnn(4, LayoutStyle::Brick).unwrap();
        let obs = PauliSum::single(readout_observables(&layout, Task::Binary).unwrap().remove(0));
        let op = propagate(&circuit, &obs, &theta, &TruncationPolicy::exact()).unwrap();
        prop_assert!((op.squared_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_only_removes_norm(theta in angles(brick_params(8)), k in 1usize..4) {
        let (circuit, layout) = build_qcnn(8, LayoutStyle::Brick).unwrap();
        let obs = PauliSum::single(readout_observables(&layout, Task::Binary).unwrap().remove(0));
        let op = propagate(&circuit, &obs, &theta, &TruncationPolicy::with_max_weight(k)).unwrap();
        prop_assert!(op.squared_norm() <= 1.0 + 1e-12);
        prop_assert!(op.sorted_terms().iter().all(|t| t.pauli.weight() <= k));
    }

    #[test]
    fn surrogate_matches_propagation(theta in angles(brick_params(8))) {
        let model = QcnnModel::build(8, LayoutStyle::Brick, Task::Binary, TruncationPolicy::with_max_weight(2)).unwrap();
        let obs = PauliSum::single(model.observables[0].clone());
        let op = propagate(&model.circuit, &obs, &theta, &model.policy).unwrap();
        let coeffs = model.graphs[0].leaf_coefficients(&model.active[0], &theta).unwrap();
        for (leaf, c) in model.graphs[0].leaves().iter().zip(&coeffs) {
            let direct = op.coefficient(&leaf.pauli).unwrap_or(0.0);
            prop_assert!((direct - c).abs() < 1e-12);
        }
    }

    #[test]
    fn shadow_estimator_values(basis in pauli_string(6), outcomes in prop::collection::vec(any::<bool>(), 6), p in pauli_string(6)) {
        prop_assume!((0..6).all(|q| basis.get(q) != Pauli::I));
        let r = ShadowRecord::new(basis.clone(), &outcomes).unwrap();
        let v = r.estimator(&p);
        let k = p.weight() as i32;
        let matches = p.support().iter().all(|&q| basis.get(q) == p.get(q));
        if matches {
            prop_assert_eq!(v.abs(), 3f64.powi(k));
        } else {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn multiclass_probabilities_normalized(a in -1.5f64..1.5, b in -1.5f64..1.5, ab in -1.5f64..1.5) {
        let p = predict_multiclass(a, b, ab);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lbfgs_history_is_monotone(scale in prop::collection::vec(0.1f64..50.0, 4), x0 in prop::collection::vec(-3.0f64..3.0, 4)) {
        let f = |x: &[f64]| {
            let v: f64 = x.iter().zip(&scale).map(|(a, s)| s * (a.cos() - 1.0).powi(2) + 0.01 * a * a).sum();
            let g = x.iter().zip(&scale).map(|(a, s)| -2.0 * s * (a.cos() - 1.0) * a.sin() + 0.02 * a).collect();
            (v, g)
        };
        let r = minimize(f, x0, &LbfgsOptions::default(), |_, _, _| {});
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn named_substreams_are_distinct(master in any::<u64>(), i in 0u64..1000) {
        prop_assert_eq!(derive_seed(master, "shadows", i), derive_seed(master, "shadows", i));
        prop_assert_ne!(derive_seed(master, "shadows", i), derive_seed(master, "init", i));
        prop_assert_ne!(derive_seed(master, "shadows", i), derive_seed(master, "shadows", i + 1));
    }

    #[test]
    fn pgate_network_conserves_mass(blocks in prop::collection::vec((0usize..7, 1usize..7), 0..25), site in 0usize..7) {
        let layers: Vec<Vec<(usize, usize)>> = blocks
            .iter()
            .map(|&(a, d)| vec![(a, (a + d) % 7)])
            .filter(|l| l[0].0 != l[0].1)
            .collect();
        let layout = QcnnLayout {
            n: 7,
            style: LayoutStyle::Brick,
            layers,
            survivors: vec![(0..7).collect()],
            readout_qubits: vec![site],
        };
        let d = purities_network(&layout).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        prop_assert!(d.values[0].abs() < 1e-12);
        prop_assert!(d.values.iter().skip(1).all(|&v| v >= 0.0));
    }

    #[test]
    fn pgate_amplitudes_stay_nonnegative(masks in prop::collection::btree_map(0u128..64, 0.0f64..1.0, 1..10), q1 in 0usize..6, q2 in 0usize..6) {
        prop_assume!(q1 != q2);
        let st = IsState { n: 6, amps: masks, offset: 0.0 };
        let out = pgate_apply(&st, q1, q2).unwrap();
        prop_assert!(out.amps.values().all(|&a| a >= 0.0));
        let mass_in: f64 = st.total_mass();
        prop_assert!((out.total_mass() - mass_in).abs() < 1e-12);
    }
}

#[test]
fn layouts_halve_survivors() {
    for n in 2..40 {
        for style in [LayoutStyle::Brick, LayoutStyle::NonCrossing] {
            let l = build_layout(n, style).unwrap();
            for w in l.survivors.windows(2) {
                assert_eq!(w[1].len(), w[0].len().div_ceil(2));
            }
            assert_eq!(l.survivors.last().unwrap().len(), 1);
            assert_eq!(l.num_layers(), (n as f64).log2().ceil() as usize);
        }
    }
}
