//! Removal and insertion of hypotheses, the two list edits that make up
//! ontology drift between offline and online traffic.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use routelab_core::augment::NoisePool;
use routelab_core::rng::{derive_seed, seeded};
use routelab_core::{Dataset, RoutingInstance, SkillSpace};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

pub const MAX_REMOVAL_RATIO: f64 = 0.5;
pub const MAX_INSERTIONS: usize = 10;

/// Removes `floor(ratio * (n - 1))` uniformly chosen non-golden hypotheses.
/// Survivors keep their relative order.
pub fn perturb_removal(
    instance: &RoutingInstance,
    ratio: f64,
    seed: u64,
) -> Result<RoutingInstance, BenchError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(BenchError::RemovalRatio(ratio));
    }
    check_gold(instance)?;
    let others = instance.len() - 1;
    let count = (ratio * others as f64).floor() as usize;
    if count == 0 {
        return Ok(instance.clone());
    }
    let mut removed = vec![false; others];
    for i in sample(&mut seeded(seed), others, count) {
        removed[i] = true;
    }
    let mut out = RoutingInstance {
        id: instance.id.clone(),
        hypotheses: Vec::with_capacity(instance.len() - count),
        gold_index: 0,
    };
    let mut other = 0;
    for (i, h) in instance.hypotheses.iter().enumerate() {
        if i == instance.gold_index {
            out.gold_index = out.hypotheses.len();
            out.hypotheses.push(h.clone());
        } else {
            if !removed[other] {
                out.hypotheses.push(h.clone());
            }
            other += 1;
        }
    }
    Ok(out)
}

/// Inserts `k` noise hypotheses, each built by the augmentation rule from a
/// uniformly chosen group that still has replacement skills, at a uniformly
/// chosen list position.
pub fn perturb_insertion(
    instance: &RoutingInstance,
    k: usize,
    skills: &SkillSpace,
    seed: u64,
) -> Result<RoutingInstance, BenchError> {
    check_gold(instance)?;
    let mut pool = NoisePool::new(instance, skills);
    if pool.total_available() < k {
        return Err(BenchError::InsufficientNoise {
            instance: instance.id.clone(),
            requested: k,
            available: pool.total_available(),
        });
    }
    let mut rng = seeded(seed);
    let mut out = instance.clone();
    for _ in 0..k {
        let open: Vec<usize> = (0..pool.group_count())
            .filter(|&g| pool.available(g) > 0)
            .collect();
        let group = open[rng.gen_range(0..open.len())];
        let noise = pool
            .draw(instance, group, &mut rng)
            .expect("group has a replacement skill");
        let at = rng.gen_range(0..=out.len());
        if at <= out.gold_index {
            out.gold_index += 1;
        }
        out.hypotheses.insert(at, noise);
    }
    Ok(out)
}

fn check_gold(instance: &RoutingInstance) -> Result<(), BenchError> {
    if instance.gold_index >= instance.len() {
        return Err(BenchError::Instance {
            instance: instance.id.clone(),
            message: format!(
                "gold index {} outside {} hypotheses",
                instance.gold_index,
                instance.len()
            ),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    Removal { ratio: f64 },
    Insertion { count: usize },
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Removal { ratio } => write!(f, "removal-{ratio}"),
            Self::Insertion { count } => write!(f, "insertion-{count}"),
        }
    }
}

/// A benchmark perturbation. Ranges follow the micro-benchmark sweeps:
/// removal ratio in [0, 0.5], insertion count in 0..=10.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub perturbation: Perturbation,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn removal(ratio: f64, seed: u64) -> Result<Self, BenchError> {
        let spec = Self {
            perturbation: Perturbation::Removal { ratio },
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn insertion(count: usize, seed: u64) -> Result<Self, BenchError> {
        let spec = Self {
            perturbation: Perturbation::Insertion { count },
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        match self.perturbation {
            Perturbation::Removal { ratio } if !(0.0..=MAX_REMOVAL_RATIO).contains(&ratio) => {
                Err(BenchError::RemovalRatio(ratio))
            }
            Perturbation::Insertion { count } if count > MAX_INSERTIONS => {
                Err(BenchError::InsertionCount(count))
            }
            _ => Ok(()),
        }
    }

    /// Instance `i` is perturbed with seed `derive_seed(self.seed, i)`.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset, BenchError> {
        self.validate()?;
        let instances = data
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let seed = derive_seed(self.seed, i as u64);
                match self.perturbation {
                    Perturbation::Removal { ratio } => perturb_removal(inst, ratio, seed),
                    Perturbation::Insertion { count } => {
                        perturb_insertion(inst, count, &data.skill_space, seed)
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            instances,
            skill_space: data.skill_space.clone(),
            context_len: data.context_len,
            provenance: format!("{}+{}", data.provenance, self.perturbation),
        })
    }
}
