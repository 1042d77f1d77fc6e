//! Synthetic routing world: ontology generation, the hypothesis proposer,
//! traffic sampling with a hidden gold rule, and subscription drift.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Condition, Dataset, DomainError, Hypothesis, Interpretation, Ontology, RoutingInstance,
    SkillId, SkillSpace, Subscription,
};
use crate::rng::{derive_seed, seeded};

/// Spare skills required beyond the largest subscriber count, so that
/// noise injection always has replacement skills to draw from.
pub const SKILL_HEADROOM: usize = 10;

const FEATURE_DIM: usize = 8;
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid world configuration: {0}")]
    Config(String),
    #[error("invalid drift configuration: {0}")]
    Drift(String),
    #[error("unknown intent {0:?}")]
    UnknownIntent(String),
    #[error("could not sample an instance with at least 2 hypotheses after {0} attempts")]
    Unsatisfiable(usize),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub n_intents: usize,
    pub n_skills: usize,
    pub subscriptions_per_intent: CountRange,
    pub utterance_vocab: usize,
    pub utterance_len: CountRange,
    pub gold_rule_seed: u64,
    pub context_len: usize,
    /// Fraction of subscriptions gated on a context signal.
    pub conditional_fraction: f64,
    /// Probability that a request carries a second interpretation.
    pub second_interpretation_prob: f64,
    pub slot_names: usize,
    pub slot_values: usize,
    pub max_slots_per_intent: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_intents: 24,
            n_skills: 48,
            subscriptions_per_intent: CountRange { min: 2, max: 6 },
            utterance_vocab: 200,
            utterance_len: CountRange { min: 3, max: 10 },
            gold_rule_seed: 20_211,
            context_len: 4,
            conditional_fraction: 0.2,
            second_interpretation_prob: 0.5,
            slot_names: 8,
            slot_values: 5,
            max_slots_per_intent: 2,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let err = |m: String| Err(WorldError::Config(m));
        let subs = self.subscriptions_per_intent;
        if self.n_intents == 0 {
            return err("n_intents must be positive".into());
        }
        if subs.min == 0 || subs.min > subs.max {
            return err(format!(
                "subscriptions_per_intent needs 1 <= min <= max, got {subs:?}"
            ));
        }
        if self.n_skills < subs.max + SKILL_HEADROOM {
            return err(format!(
                "n_skills = {} leaves no augmentation headroom: need at least subscriptions_per_intent.max + {SKILL_HEADROOM} = {}",
                self.n_skills,
                subs.max + SKILL_HEADROOM
            ));
        }
        if self.utterance_vocab == 0 {
            return err("utterance_vocab must be positive".into());
        }
        if self.utterance_len.min == 0 || self.utterance_len.min > self.utterance_len.max {
            return err(format!(
                "utterance_len needs 1 <= min <= max, got {:?}",
                self.utterance_len
            ));
        }
        for (name, p) in [
            ("conditional_fraction", self.conditional_fraction),
            (
                "second_interpretation_prob",
                self.second_interpretation_prob,
            ),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.conditional_fraction > 0.0 && self.context_len == 0 {
            return err("conditional subscriptions need context_len > 0".into());
        }
        if self.max_slots_per_intent > self.slot_names {
            return err("max_slots_per_intent exceeds slot_names".into());
        }
        if self.max_slots_per_intent > 0 && self.slot_values == 0 {
            return err("slot_values must be positive when intents carry slots".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub p_unsubscribe: f64,
    pub p_new_subscription: f64,
    pub seed: u64,
}

impl DriftConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        for (name, p) in [
            ("p_unsubscribe", self.p_unsubscribe),
            ("p_new_subscription", self.p_new_subscription),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(WorldError::Drift(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

pub fn intent_name(i: usize) -> String {
    format!("intent_{i:03}")
}

pub fn skill_name(i: usize) -> String {
    format!("skill_{i:03}")
}

/// Random ontology: every intent gets a uniform number of distinct
/// subscribers within the configured bounds; a fraction of edges is gated
/// on one context signal.
pub fn generate_ontology(config: &WorldConfig, seed: u64) -> Result<Ontology, WorldError> {
    config.validate()?;
    let mut rng = seeded(seed);
    let skills: Vec<SkillId> = (0..config.n_skills)
        .map(|i| SkillId::new(skill_name(i)))
        .collect();
    let mut subscriptions = BTreeMap::new();
    for i in 0..config.n_intents {
        let subs = config.subscriptions_per_intent;
        let k = rng.gen_range(subs.min..=subs.max);
        let chosen: Vec<&SkillId> = skills.choose_multiple(&mut rng, k).collect();
        let edges = chosen
            .into_iter()
            .map(|skill| {
                let condition =
                    (rng.gen::<f64>() < config.conditional_fraction).then(|| Condition {
                        signal_index: rng.gen_range(0..config.context_len),
                        required_value: rng.gen_range(0..=1),
                    });
                Subscription {
                    skill: skill.clone(),
                    condition,
                }
            })
            .collect();
        subscriptions.insert(intent_name(i), edges);
    }
    Ok(Ontology::new(SkillSpace::new(skills)?, subscriptions)?)
}

/// The hypothesis proposer: one hypothesis per (interpretation, accepting
/// subscriber), interpretation-major, subscribers in ontology order.
pub fn propose_hypotheses(
    ontology: &Ontology,
    utterance: &[u32],
    interpretations: &[Interpretation],
    context: &[u8],
) -> Result<Vec<Hypothesis>, WorldError> {
    let mut out = Vec::new();
    for interp in interpretations {
        let subs = ontology
            .subscribers(interp.intent())
            .ok_or_else(|| WorldError::UnknownIntent(interp.intent().to_string()))?;
        out.extend(
            subs.iter()
                .filter(|s| s.accepts(context))
                .map(|s| Hypothesis {
                    utterance: utterance.to_vec(),
                    interpretation: interp.clone(),
                    skill: s.skill.clone(),
                    context: context.to_vec(),
                }),
        );
    }
    Ok(out)
}

/// Hidden ground-truth rule of the synthetic world.
///
/// A hypothesis scores `skill_bias + intent_bias + w_skill . u + v_skill . c`
/// where `u` is the mean of frozen random token features of the utterance
/// and `c` maps context signals to `+-1`. The golden hypothesis is the
/// arg-max, lowest index on ties.
#[derive(Clone, Debug)]
pub struct GoldRule {
    token_features: Vec<[f64; FEATURE_DIM]>,
    skill_bias: HashMap<SkillId, f64>,
    skill_weights: HashMap<SkillId, [f64; FEATURE_DIM]>,
    skill_context: HashMap<SkillId, Vec<f64>>,
    intent_bias: HashMap<String, f64>,
}

impl GoldRule {
    pub fn new(config: &WorldConfig, ontology: &Ontology) -> Self {
        let mut rng = seeded(config.gold_rule_seed);
        let token_features = (0..config.utterance_vocab)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
            .collect();
        let mut skill_bias = HashMap::new();
        let mut skill_weights = HashMap::new();
        let mut skill_context = HashMap::new();
        for skill in ontology.skill_space().skills() {
            skill_bias.insert(skill.clone(), rng.gen_range(-1.0..1.0));
            skill_weights.insert(
                skill.clone(),
                std::array::from_fn(|_| rng.gen_range(-2.0..2.0)),
            );
            skill_context.insert(
                skill.clone(),
                (0..config.context_len)
                    .map(|_| rng.gen_range(-0.5..0.5))
                    .collect(),
            );
        }
        let intent_bias = ontology
            .intents()
            .map(|i| (i.to_string(), rng.gen_range(-0.5..0.5)))
            .collect();
        Self {
            token_features,
            skill_bias,
            skill_weights,
            skill_context,
            intent_bias,
        }
    }

    fn utterance_features(&self, utterance: &[u32]) -> [f64; FEATURE_DIM] {
        let mut u = [0.0; FEATURE_DIM];
        for &t in utterance {
            let f = &self.token_features[t as usize % self.token_features.len()];
            for (a, b) in u.iter_mut().zip(f) {
                *a += b;
            }
        }
        let n = utterance.len().max(1) as f64;
        u.map(|v| v / n)
    }

    pub fn score(&self, h: &Hypothesis) -> f64 {
        let u = self.utterance_features(&h.utterance);
        let bias = self.skill_bias.get(&h.skill).copied().unwrap_or(0.0)
            + self
                .intent_bias
                .get(h.interpretation.intent())
                .copied()
                .unwrap_or(0.0);
        let interaction: f64 = self
            .skill_weights
            .get(&h.skill)
            .map_or(0.0, |w| w.iter().zip(&u).map(|(a, b)| a * b).sum());
        let context: f64 = self.skill_context.get(&h.skill).map_or(0.0, |v| {
            v.iter()
                .zip(&h.context)
                .map(|(w, &c)| w * if c > 0 { 1.0 } else { -1.0 })
                .sum()
        });
        bias + interaction + context
    }

    pub fn pick(&self, hypotheses: &[Hypothesis]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, h) in hypotheses.iter().enumerate() {
            let s = self.score(h);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        best
    }
}

/// Slot names an intent may carry, derived from the gold-rule seed.
fn slot_schema(config: &WorldConfig, intent_index: usize) -> Vec<String> {
    let mut rng = seeded(derive_seed(
        config.gold_rule_seed,
        0x5107_0000 + intent_index as u64,
    ));
    let k = rng.gen_range(0..=config.max_slots_per_intent);
    let mut names: Vec<usize> = (0..config.slot_names).collect();
    names.shuffle(&mut rng);
    names.truncate(k);
    names.sort_unstable();
    names.into_iter().map(|n| format!("slot_{n}")).collect()
}

/// Synthetic traffic: each request gets a random utterance, random context,
/// one or two interpretations, and the proposer's hypothesis list; the gold
/// index comes from [`GoldRule`]. Requests with fewer than two hypotheses
/// are resampled.
pub fn sample_dataset(
    ontology: &Ontology,
    config: &WorldConfig,
    n_instances: usize,
    seed: u64,
) -> Result<Dataset, WorldError> {
    config.validate()?;
    if n_instances == 0 {
        return Err(WorldError::Config("n_instances must be at least 1".into()));
    }
    let intents: Vec<&str> = ontology.intents().collect();
    let schemas: Vec<Vec<String>> = (0..intents.len()).map(|i| slot_schema(config, i)).collect();
    let rule = GoldRule::new(config, ontology);
    let mut rng = seeded(seed);
    let mut instances = Vec::with_capacity(n_instances);

    for idx in 0..n_instances {
        let mut attempt = 0;
        let (hypotheses, gold_index) = loop {
            attempt += 1;
            if attempt > MAX_RESAMPLES {
                return Err(WorldError::Unsatisfiable(MAX_RESAMPLES));
            }
            let len = rng.gen_range(config.utterance_len.min..=config.utterance_len.max);
            let utterance: Vec<u32> = (0..len)
                .map(|_| rng.gen_range(0..config.utterance_vocab) as u32)
                .collect();
            let context: Vec<u8> = (0..config.context_len)
                .map(|_| rng.gen_range(0..=1))
                .collect();
            let first = rng.gen_range(0..intents.len());
            let mut picked = vec![first];
            if intents.len() > 1 && rng.gen::<f64>() < config.second_interpretation_prob {
                let mut second = rng.gen_range(0..intents.len() - 1);
                if second >= first {
                    second += 1;
                }
                picked.push(second);
            }
            let mut interpretations = Vec::with_capacity(picked.len());
            for &i in &picked {
                let mut slots = Vec::new();
                for name in &schemas[i] {
                    if rng.gen_bool(0.5) {
                        slots.push((
                            name.clone(),
                            format!("v{}", rng.gen_range(0..config.slot_values)),
                        ));
                    }
                }
                interpretations.push(Interpretation::new(intents[i], slots)?);
            }
            let hypotheses = propose_hypotheses(ontology, &utterance, &interpretations, &context)?;
            if hypotheses.len() >= 2 {
                let gold = rule.pick(&hypotheses);
                break (hypotheses, gold);
            }
        };
        instances.push(RoutingInstance {
            id: format!("s{seed}-{idx:06}"),
            hypotheses,
            gold_index,
        });
    }
    Ok(Dataset {
        instances,
        skill_space: ontology.skill_space().clone(),
        context_len: config.context_len,
        provenance: "synthetic".into(),
    })
}

/// Applies random subscription changes: each existing edge is removed with
/// `p_unsubscribe`, each absent (intent, skill) pair is added, unconditionally,
/// with `p_new_subscription`. An intent never loses its last subscriber.
pub fn drift_ontology(ontology: &Ontology, drift: &DriftConfig) -> Result<Ontology, WorldError> {
    drift.validate()?;
    let mut rng = seeded(drift.seed);
    let skills = ontology.skill_space().skills();
    let mut subscriptions = BTreeMap::new();
    for (intent, subs) in ontology.subscriptions() {
        let mut kept: Vec<Subscription> = subs
            .iter()
            .filter(|_| rng.gen::<f64>() >= drift.p_unsubscribe)
            .cloned()
            .collect();
        if kept.is_empty() {
            kept.push(subs[0].clone());
        }
        for skill in skills {
            if subs.iter().any(|s| &s.skill == skill) {
                continue;
            }
            if rng.gen::<f64>() < drift.p_new_subscription {
                kept.push(Subscription {
                    skill: skill.clone(),
                    condition: None,
                });
            }
        }
        subscriptions.insert(intent.clone(), kept);
    }
    Ok(Ontology::new(
        ontology.skill_space().clone(),
        subscriptions,
    )?)
}

/// `p_new_subscription` that yields `target` newly inserted hypotheses per
/// instance of `dataset` on average, clamped to `[0, 1]`.
pub fn calibrate_new_subscription_prob(ontology: &Ontology, dataset: &Dataset, target: f64) -> f64 {
    let n_skills = ontology.skill_space().len();
    let absent_pairs: usize = dataset
        .instances
        .iter()
        .flat_map(|inst| inst.groups())
        .map(|g| {
            let subscribed = ontology
                .subscribers(g.interpretation.intent())
                .map_or(0, <[_]>::len);
            n_skills - subscribed
        })
        .sum();
    if absent_pairs == 0 {
        return 0.0;
    }
    let mean = absent_pairs as f64 / dataset.len().max(1) as f64;
    (target / mean).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftedDataset {
    pub dataset: Dataset,
    /// Instances whose golden (interpretation, skill) pair was no longer
    /// proposed under the drifted ontology.
    pub dropped: usize,
}

/// Re-proposes every instance against a drifted ontology, keeping the
/// utterance, interpretations, context and golden skill fixed.
pub fn regenerate_under_drift(
    dataset: &Dataset,
    drifted: &Ontology,
) -> Result<DriftedDataset, WorldError> {
    let mut instances = Vec::with_capacity(dataset.len());
    let mut dropped = 0;
    for inst in &dataset.instances {
        let Some(gold) = inst.gold() else {
            dropped += 1;
            continue;
        };
        let interpretations: Vec<Interpretation> = inst
            .groups()
            .into_iter()
            .map(|g| g.interpretation)
            .collect();
        let hypotheses =
            propose_hypotheses(drifted, &gold.utterance, &interpretations, &gold.context)?;
        match hypotheses
            .iter()
            .position(|h| h.interpretation == gold.interpretation && h.skill == gold.skill)
        {
            Some(gold_index) => instances.push(RoutingInstance {
                id: inst.id.clone(),
                hypotheses,
                gold_index,
            }),
            None => dropped += 1,
        }
    }
    Ok(DriftedDataset {
        dataset: Dataset {
            instances,
            skill_space: dataset.skill_space.clone(),
            context_len: dataset.context_len,
            provenance: "test2-drifted".into(),
        },
        dropped,
    })
}
