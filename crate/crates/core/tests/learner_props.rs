use proptest::prelude::*;
use slgb::dataset::{Attribute, Dataset, Instance};
use slgb::rules::{ModelKind, RuleModel, WhiteBox, WhiteBoxKind};

const KINDS: [WhiteBoxKind; 3] = [WhiteBoxKind::C45, WhiteBoxKind::Part, WhiteBoxKind::Ripper];

fn schema() -> Vec<Attribute> {
    vec![Attribute::numeric("a"), Attribute::nominal("b", ["p", "q", "r"]), Attribute::numeric("c")]
}

fn row() -> impl Strategy<Value = Vec<f64>> {
    (
        prop_oneof![12 => (0u8..20).prop_map(|v| v as f64 / 4.0), 1 => Just(f64::NAN)],
        prop_oneof![12 => (0usize..3).prop_map(|v| v as f64), 1 => Just(f64::NAN)],
        prop_oneof![12 => -3.0..3.0f64, 1 => Just(f64::NAN)],
    )
        .prop_map(|(a, b, c)| vec![a, b, c])
}

/// Labels follow a noisy rule so the learners have structure to find.
fn dataset() -> impl Strategy<Value = (Dataset, Vec<f64>)> {
    prop::collection::vec((row(), 0usize..3, 0.0..1.0f64, 0.05..3.0f64), 6..70).prop_map(|rows| {
        let mut weights = Vec::new();
        let instances = rows
            .into_iter()
            .map(|(v, noise, flip, w)| {
                let clean = if v[0] > 2.0 { 0 } else if v[1] == 1.0 { 1 } else { 2 };
                weights.push(w);
                Instance::new(v, Some(if flip < 0.2 { noise } else { clean }))
            })
            .collect();
        let d = Dataset::new(schema(), "y", vec!["x".into(), "y".into(), "z".into()], instances).unwrap();
        (d, weights)
    })
}

fn structure(m: &RuleModel) -> Vec<(Vec<String>, usize)> {
    m.rules
        .iter()
        .map(|r| (r.conditions.iter().map(|c| c.render(&m.schema)).collect(), r.consequent))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_and_well_formed((d, w) in dataset(), probes in prop::collection::vec(row(), 20)) {
        for kind in KINDS {
            let m = WhiteBox::default_for(kind).train(&d, &w).unwrap();
            prop_assert!(!m.rules.is_empty());
            for r in &m.rules {
                prop_assert!((0.0..=1.0).contains(&r.confidence));
                prop_assert!(r.coverage >= 0.0);
                prop_assert!(r.consequent < 3);
            }
            if m.kind != ModelKind::Tree {
                prop_assert!(m.rules.last().unwrap().is_default());
            }
            for p in probes.iter().chain(d.instances.iter().map(|x| &x.values)) {
                prop_assert!(m.predict(p) < 3);
                let e = m.explain(p);
                prop_assert_eq!(e.rule.consequent, m.predict(p));
            }
        }
    }

    #[test]
    fn deterministic((d, w) in dataset(), seed in any::<u64>()) {
        for kind in KINDS {
            let wb = WhiteBox::default_for(kind).with_seed(seed);
            prop_assert_eq!(wb.train(&d, &w).unwrap(), wb.train(&d, &w).unwrap());
        }
    }

    #[test]
    fn normalized_scaling_by_powers_of_two_gives_identical_model((d, w) in dataset(), e in -6i32..=6) {
        let k = 2f64.powi(e);
        let scaled: Vec<f64> = w.iter().map(|x| x * k).collect();
        for kind in KINDS {
            let wb = WhiteBox::default_for(kind).with_normalized_weights(true);
            prop_assert_eq!(wb.train(&d, &w).unwrap(), wb.train(&d, &scaled).unwrap(), "{:?}", kind);
        }
    }

    #[test]
    fn ordered_lists_cover_their_residual((d, w) in dataset()) {
        for kind in [WhiteBoxKind::Part, WhiteBoxKind::Ripper] {
            let m = WhiteBox::default_for(kind).train(&d, &w).unwrap();
            let mut residual: Vec<usize> = (0..d.len()).filter(|&i| w[i] > 0.0).collect();
            for r in &m.rules[..m.rules.len() - 1] {
                let (covered, rest): (Vec<usize>, Vec<usize>) =
                    residual.iter().partition(|&&i| r.matches(&d.instances[i].values));
                let weight: f64 = covered.iter().map(|&i| w[i]).sum();
                prop_assert!(weight > 0.0, "{:?} rule covers nothing on its residual", kind);
                residual = rest;
            }
        }
    }
}

/// Continuous data without weight ties: with normalization on, any positive
/// scale keeps the same conditions and consequents; coverage only moves in
/// the last bits.
#[test]
fn normalized_arbitrary_scaling_keeps_rule_structure() {
    let mut state = 7u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut instances = Vec::new();
    let mut weights = Vec::new();
    for _ in 0..150 {
        let (a, c) = (next() * 5.0, next() * 6.0 - 3.0);
        let b = (next() * 3.0).floor();
        let y = if a > 2.5 { 0 } else if c > 0.5 { 1 } else { 2 };
        let y = if next() < 0.1 { (y + 1) % 3 } else { y };
        instances.push(Instance::new(vec![a, b, c], Some(y)));
        weights.push(0.2 + next());
    }
    let d = Dataset::new(schema(), "y", vec!["x".into(), "y".into(), "z".into()], instances).unwrap();
    for kind in KINDS {
        let wb = WhiteBox::default_for(kind).with_normalized_weights(true);
        let base = wb.train(&d, &weights).unwrap();
        for k in [0.1, 3.0, 7.5, 1000.0] {
            let scaled: Vec<f64> = weights.iter().map(|x| x * k).collect();
            let m = wb.train(&d, &scaled).unwrap();
            assert_eq!(structure(&m), structure(&base), "{kind:?} at scale {k}");
            for (a, b) in m.rules.iter().zip(&base.rules) {
                assert!((a.coverage - b.coverage).abs() < 1e-9 && (a.confidence - b.confidence).abs() < 1e-9);
            }
        }
    }
}

/// Raw weights: the leaf minimum is a weighted count, so shrinking every
/// weight can only merge leaves, never split them.
#[test]
fn raw_weights_treat_leaf_minimum_as_weighted_count() {
    const TINY: f64 = 1.0 / 128.0;
    let instances: Vec<Instance> = (0..60)
        .map(|i| {
            let a = (i % 20) as f64 / 4.0;
            let y = if a > 2.0 { 0 } else if i % 3 == 1 { 1 } else { 2 };
            Instance::new(vec![a, (i % 3) as f64, (i as f64 * 0.7).sin()], Some(if i % 11 == 0 { (y + 1) % 3 } else { y }))
        })
        .collect();
    let d = Dataset::new(schema(), "y", vec!["x".into(), "y".into(), "z".into()], instances).unwrap();
    for kind in KINDS {
        let wb = WhiteBox::default_for(kind);
        let full = wb.train(&d, &[1.0; 60]).unwrap();
        let tiny = wb.train(&d, &[TINY; 60]).unwrap();
        assert!(tiny.rules.len() <= full.rules.len(), "{kind:?}: {} > {}", tiny.rules.len(), full.rules.len());
        assert_eq!(tiny.rules.len(), 1, "{kind:?}: total weight 60/128 is below one leaf minimum");
        let normalized = wb.with_normalized_weights(true);
        assert_eq!(normalized.train(&d, &[TINY; 60]).unwrap(), normalized.train(&d, &[1.0; 60]).unwrap());
    }
}

#[test]
fn zero_weight_instances_are_ignored() {
    let make = |extra: bool| {
        let mut inst: Vec<Instance> = (0..40)
            .map(|i| Instance::new(vec![i as f64 / 10.0, (i % 3) as f64, 0.0], Some(usize::from(i >= 20))))
            .collect();
        if extra {
            inst.extend((0..10).map(|i| Instance::new(vec![i as f64 / 10.0, 0.0, 1.0], Some(2))));
        }
        Dataset::new(schema(), "y", vec!["x".into(), "y".into(), "z".into()], inst).unwrap()
    };
    let plain = make(false);
    let padded = make(true);
    let w_plain = vec![1.0; 40];
    let mut w_padded = vec![1.0; 40];
    w_padded.extend([0.0; 10]);
    for kind in KINDS {
        let wb = WhiteBox::default_for(kind);
        let a = wb.train(&plain, &w_plain).unwrap();
        let b = wb.train(&padded, &w_padded).unwrap();
        assert_eq!(structure(&a), structure(&b), "{kind:?}");
    }
}
