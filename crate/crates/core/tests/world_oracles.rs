use std::collections::HashSet;

use proptest::prelude::*;
use routelab_core::io::{read_dataset, write_dataset};
use routelab_core::world::{
    drift_ontology, generate_ontology, propose_hypotheses, regenerate_under_drift, sample_dataset,
    CountRange, DriftConfig, WorldConfig,
};
use routelab_core::{validate_dataset, Interpretation, Ontology, SkillId};

fn config() -> WorldConfig {
    WorldConfig {
        n_intents: 12,
        n_skills: 24,
        subscriptions_per_intent: CountRange { min: 2, max: 6 },
        ..Default::default()
    }
}

#[test]
fn sampled_instances_are_valid_and_gold_is_subscribed() {
    let cfg = config();
    let ontology = generate_ontology(&cfg, 5).unwrap();
    let data = sample_dataset(&ontology, &cfg, 1000, 13).unwrap();
    assert!(validate_dataset(&data).is_valid());
    for inst in &data.instances {
        assert!(inst.len() >= 2);
        let gold = inst.gold().unwrap();
        let sub = ontology
            .subscription(gold.interpretation.intent(), &gold.skill)
            .unwrap_or_else(|| panic!("{}: gold skill not subscribed", inst.id));
        assert!(sub.accepts(&gold.context));
    }
}

fn pair_set(hyps: &[routelab_core::Hypothesis]) -> HashSet<(Interpretation, SkillId)> {
    hyps.iter()
        .map(|h| (h.interpretation.clone(), h.skill.clone()))
        .collect()
}

/// Brute-force per-instance comparison of the hypothesis sets before and
/// after drift against the edge sets of both ontologies.
fn check_drift_sets(before: &Ontology, after: &Ontology, drift: DriftConfig) {
    let cfg = config();
    let data = sample_dataset(before, &cfg, 400, 21).unwrap();
    let out = regenerate_under_drift(&data, after).unwrap();
    assert_eq!(out.dataset.provenance, "test2-drifted");
    assert_eq!(out.dataset.len() + out.dropped, data.len());

    let by_id: std::collections::HashMap<_, _> =
        data.instances.iter().map(|i| (i.id.clone(), i)).collect();
    for on in &out.dataset.instances {
        let off = by_id[&on.id];
        let (off_set, on_set) = (pair_set(&off.hypotheses), pair_set(&on.hypotheses));
        let ctx = &off.hypotheses[0].context;
        for (interp, skill) in on_set.difference(&off_set) {
            let was = before.subscription(interp.intent(), skill);
            let now = after.subscription(interp.intent(), skill).unwrap();
            assert!(was.is_none(), "inserted pair must be a new edge");
            assert!(now.condition.is_none() && now.accepts(ctx));
        }
        for (interp, skill) in off_set.difference(&on_set) {
            assert!(before.is_subscribed(interp.intent(), skill));
            assert!(
                !after.is_subscribed(interp.intent(), skill),
                "removed pair must be a removed edge"
            );
        }
        assert_eq!(on.gold().unwrap().skill, off.gold().unwrap().skill);
        assert_eq!(
            on.gold().unwrap().interpretation,
            off.gold().unwrap().interpretation
        );
    }
    if drift.p_unsubscribe == 0.0 {
        assert_eq!(out.dropped, 0);
        for on in &out.dataset.instances {
            assert!(on.len() >= by_id[&on.id].len());
        }
    }
}

#[test]
fn drift_differences_match_edge_changes() {
    let ontology = generate_ontology(&config(), 9).unwrap();
    for drift in [
        DriftConfig {
            p_unsubscribe: 0.1,
            p_new_subscription: 0.05,
            seed: 3,
        },
        DriftConfig {
            p_unsubscribe: 0.0,
            p_new_subscription: 0.2,
            seed: 4,
        },
        DriftConfig {
            p_unsubscribe: 0.5,
            p_new_subscription: 0.0,
            seed: 5,
        },
    ] {
        let drifted = drift_ontology(&ontology, &drift).unwrap();
        check_drift_sets(&ontology, &drifted, drift);
    }
}

#[test]
fn identity_drift_only_changes_provenance() {
    let cfg = config();
    let ontology = generate_ontology(&cfg, 9).unwrap();
    let data = sample_dataset(&ontology, &cfg, 300, 2).unwrap();
    let none = DriftConfig {
        p_unsubscribe: 0.0,
        p_new_subscription: 0.0,
        seed: 1,
    };
    let out = regenerate_under_drift(&data, &drift_ontology(&ontology, &none).unwrap()).unwrap();
    assert_eq!(out.dropped, 0);
    assert_eq!(out.dataset.instances, data.instances);
}

#[test]
fn sampled_dataset_round_trips_byte_identically() {
    let cfg = config();
    let ontology = generate_ontology(&cfg, 1).unwrap();
    let data = sample_dataset(&ontology, &cfg, 500, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_dataset(&data, &a).unwrap();
    let back = read_dataset(&a).unwrap();
    assert_eq!(back, data);
    write_dataset(&back, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn drift_keeps_every_intent_served(seed in any::<u64>(), p_un in 0.0f64..=1.0, p_new in 0.0f64..=1.0) {
        let ontology = generate_ontology(&config(), seed % 17).unwrap();
        let drifted = drift_ontology(&ontology, &DriftConfig { p_unsubscribe: p_un, p_new_subscription: p_new, seed }).unwrap();
        prop_assert_eq!(drifted.intents().count(), ontology.intents().count());
        for intent in drifted.intents() {
            prop_assert!(!drifted.subscribers(intent).unwrap().is_empty());
        }
        prop_assert_eq!(&drifted, &drift_ontology(&ontology, &DriftConfig { p_unsubscribe: p_un, p_new_subscription: p_new, seed }).unwrap());
    }

    #[test]
    fn proposals_grouped_equal_accepting_subscribers(seed in 0u64..64, ctx in prop::collection::vec(0u8..=1, 4), a in 0usize..12, b in 0usize..12) {
        let ontology = generate_ontology(&config(), seed).unwrap();
        let intents: Vec<String> = ontology.intents().map(str::to_string).collect();
        let interps = vec![Interpretation::intent_only(intents[a].clone()).unwrap(), Interpretation::intent_only(intents[b].clone()).unwrap()];
        let hyps = propose_hypotheses(&ontology, &[1, 2], &interps, &ctx).unwrap();
        let mut offset = 0;
        for interp in &interps {
            let expected: Vec<&SkillId> = ontology.subscribers(interp.intent()).unwrap().iter().filter(|s| s.accepts(&ctx)).map(|s| &s.skill).collect();
            let got: Vec<&SkillId> = hyps[offset..offset + expected.len()].iter().map(|h| &h.skill).collect();
            prop_assert_eq!(got, expected.clone());
            prop_assert!(hyps[offset..offset + expected.len()].iter().all(|h| &h.interpretation == interp));
            offset += expected.len();
        }
        prop_assert_eq!(offset, hyps.len());
    }
}
