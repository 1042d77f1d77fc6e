use std::collections::HashSet;

use routelab_core::augment::{augment_dataset, augment_instance, AugmentConfig};
use routelab_core::io::dataset_lines;
use routelab_core::world::{generate_ontology, sample_dataset, CountRange, WorldConfig};
use routelab_core::{validate_dataset, Dataset, RoutingInstance, SkillSpace};

fn data(n: usize) -> Dataset {
    let cfg = WorldConfig {
        n_intents: 16,
        n_skills: 20,
        subscriptions_per_intent: CountRange { min: 2, max: 8 },
        ..Default::default()
    };
    let ontology = generate_ontology(&cfg, 31).unwrap();
    sample_dataset(&ontology, &cfg, n, 32).unwrap()
}

/// Independent recount of the expected number of noise hypotheses.
fn expected_noise(inst: &RoutingInstance, skills: &SkillSpace, m: usize) -> usize {
    let interps: Vec<_> = {
        let mut seen = Vec::new();
        for h in &inst.hypotheses {
            if !seen.contains(&&h.interpretation) {
                seen.push(&h.interpretation);
            }
        }
        seen
    };
    interps
        .iter()
        .map(|interp| {
            let proposed: HashSet<_> = inst
                .hypotheses
                .iter()
                .filter(|h| &h.interpretation == *interp)
                .map(|h| &h.skill)
                .collect();
            let free = skills
                .skills()
                .iter()
                .filter(|s| !proposed.contains(s))
                .count();
            m.min(free)
        })
        .sum()
}

#[test]
fn augmentation_invariants_hold_by_brute_force() {
    let d = data(1000);
    for m in [0, 1, 3, 5] {
        let cfg = AugmentConfig {
            m,
            seed: 77,
            ..Default::default()
        };
        let out = augment_dataset(&d, &cfg).unwrap();
        assert_eq!(out.provenance, "train2-augmented");
        assert!(validate_dataset(&out).is_valid());
        for (before, after) in d.instances.iter().zip(&out.instances) {
            // cardinality
            assert_eq!(
                after.len(),
                before.len() + expected_noise(before, &d.skill_space, m)
            );
            // originals kept as a prefix, gold preserved verbatim
            assert_eq!(&after.hypotheses[..before.len()], &before.hypotheses[..]);
            assert_eq!(after.gold(), before.gold());
            // exclusion
            let mut pairs: HashSet<_> = before
                .hypotheses
                .iter()
                .map(|h| (&h.interpretation, &h.skill))
                .collect();
            for noise in &after.hypotheses[before.len()..] {
                assert!(
                    pairs.insert((&noise.interpretation, &noise.skill)),
                    "{}: duplicate noise",
                    before.id
                );
                assert!(before
                    .hypotheses
                    .iter()
                    .any(|h| h.interpretation == noise.interpretation
                        && h.utterance == noise.utterance
                        && h.context == noise.context));
            }
        }
        // determinism at the byte level
        let again = augment_dataset(&d, &cfg).unwrap();
        assert_eq!(dataset_lines(&out), dataset_lines(&again));
    }
}

#[test]
fn m_zero_changes_only_provenance() {
    let d = data(50);
    let out = augment_dataset(
        &d,
        &AugmentConfig {
            m: 0,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.instances, d.instances);
}

#[test]
fn per_instance_seed_changes_draws() {
    let d = data(20);
    let a = augment_instance(
        &d.instances[0],
        &d.skill_space,
        &AugmentConfig {
            m: 3,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let b = augment_instance(
        &d.instances[0],
        &d.skill_space,
        &AugmentConfig {
            m: 3,
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(a.len(), b.len());
    assert_ne!(a, b);
}
