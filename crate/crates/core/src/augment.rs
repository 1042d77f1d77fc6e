//! Noise-injection augmentation of training instances.
//!
//! For every interpretation group of an instance, `m` noise hypotheses are
//! drawn without duplication. Each copies a random member of the group and
//! swaps its skill for a random known skill that the group does not
//! already propose. Noise is appended after the original hypotheses and is
//! never golden.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Dataset, Hypothesis, Interpretation, RoutingInstance, SkillId, SkillSpace};
use crate::rng::{derive_seed, seeded};

/// Behaviour when a group has fewer than `m` replacement skills.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapMode {
    /// Inject as many as are available.
    #[default]
    Cap,
    /// Fail the instance.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Noise hypotheses per interpretation group.
    pub m: usize,
    pub seed: u64,
    pub cap_mode: CapMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            m: 3,
            seed: 0,
            cap_mode: CapMode::Cap,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("instance {instance}: intent {intent:?} has only {available} replacement skills, {requested} requested")]
    Shortage {
        instance: String,
        intent: String,
        available: usize,
        requested: usize,
    },
}

#[derive(Clone, Debug)]
struct PoolGroup {
    interpretation: Interpretation,
    members: Vec<usize>,
    available: Vec<SkillId>,
}

/// Remaining legal noise draws for one instance, per interpretation group.
///
/// Each draw consumes its replacement skill, so repeated draws never
/// produce the same (interpretation, skill) pair.
#[derive(Clone, Debug)]
pub struct NoisePool {
    groups: Vec<PoolGroup>,
}

impl NoisePool {
    pub fn new(instance: &RoutingInstance, skills: &SkillSpace) -> Self {
        let groups = instance
            .groups()
            .into_iter()
            .map(|g| {
                let proposed: Vec<&SkillId> = g
                    .members
                    .iter()
                    .map(|&i| &instance.hypotheses[i].skill)
                    .collect();
                let available = skills
                    .skills()
                    .iter()
                    .filter(|s| !proposed.contains(s))
                    .cloned()
                    .collect();
                PoolGroup {
                    interpretation: g.interpretation,
                    members: g.members,
                    available,
                }
            })
            .collect();
        Self { groups }
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn available(&self, group: usize) -> usize {
        self.groups[group].available.len()
    }

    pub fn total_available(&self) -> usize {
        self.groups.iter().map(|g| g.available.len()).sum()
    }

    pub fn interpretation(&self, group: usize) -> &Interpretation {
        &self.groups[group].interpretation
    }

    /// One noise hypothesis for `group`: a uniformly chosen member with its
    /// skill replaced by a uniformly chosen remaining skill.
    pub fn draw(
        &mut self,
        instance: &RoutingInstance,
        group: usize,
        rng: &mut impl Rng,
    ) -> Option<Hypothesis> {
        let g = &mut self.groups[group];
        if g.available.is_empty() {
            return None;
        }
        let source = g.members[rng.gen_range(0..g.members.len())];
        let skill = g.available.remove(rng.gen_range(0..g.available.len()));
        Some(instance.hypotheses[source].with_skill(skill))
    }
}

pub fn augment_instance(
    instance: &RoutingInstance,
    skills: &SkillSpace,
    config: &AugmentConfig,
) -> Result<RoutingInstance, AugmentError> {
    if config.m == 0 {
        return Ok(instance.clone());
    }
    let mut rng = seeded(config.seed);
    let mut pool = NoisePool::new(instance, skills);
    let mut out = instance.clone();
    for group in 0..pool.group_count() {
        let available = pool.available(group);
        if available < config.m && config.cap_mode == CapMode::Strict {
            return Err(AugmentError::Shortage {
                instance: instance.id.clone(),
                intent: pool.interpretation(group).intent().to_string(),
                available,
                requested: config.m,
            });
        }
        for _ in 0..config.m.min(available) {
            out.hypotheses.extend(pool.draw(instance, group, &mut rng));
        }
    }
    Ok(out)
}

/// Static augmentation of a whole dataset with per-instance derived seeds.
pub fn augment_dataset(dataset: &Dataset, config: &AugmentConfig) -> Result<Dataset, AugmentError> {
    let instances = dataset
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let per_instance = AugmentConfig {
                seed: derive_seed(config.seed, i as u64),
                ..*config
            };
            augment_instance(inst, &dataset.skill_space, &per_instance)
        })
        .collect::<Result<_, _>>()?;
    Ok(Dataset {
        instances,
        skill_space: dataset.skill_space.clone(),
        context_len: dataset.context_len,
        provenance: "train2-augmented".into(),
    })
}
