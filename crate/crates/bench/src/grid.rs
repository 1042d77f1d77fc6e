//! The 12-variant training and evaluation grid.

use routelab_core::rng::derive_seed;
use routelab_core::Dataset;
use routelab_ranker::{train, Ranker, TrainConfig, VariantSpec};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::metric::{accuracy, Router};
use crate::perturb::{PerturbationSpec, MAX_INSERTIONS};
use crate::report::{
    BaselineKey, ConditionSummary, EvaluationReport, ReportMetadata, TrainingRecord,
};

pub const REMOVAL_RATIOS: [f64; 5] = [0.0, 0.125, 0.25, 0.375, 0.5];
pub const OFFLINE: &str = "offline";
pub const DRIFTED: &str = "drifted";

const CONDITION_STREAM: u64 = 0x7_0000;
const TRAIN_STREAM: u64 = 0x8_0000;

type Result<T> = std::result::Result<T, BenchError>;

/// A named test set, optionally perturbed before evaluation.
#[derive(Clone, Debug)]
pub struct TestCondition {
    pub name: String,
    pub dataset: Dataset,
    pub perturbation: Option<PerturbationSpec>,
}

impl TestCondition {
    pub fn plain(name: impl Into<String>, dataset: Dataset) -> Self {
        Self {
            name: name.into(),
            dataset,
            perturbation: None,
        }
    }

    pub fn perturbed(name: impl Into<String>, dataset: Dataset, spec: PerturbationSpec) -> Self {
        Self {
            name: name.into(),
            dataset,
            perturbation: Some(spec),
        }
    }
}

/// `offline`, `drifted` (when given), the removal sweep over
/// [`REMOVAL_RATIOS`] and the insertion sweep 0..=10, all perturbations
/// applied to the offline test.
pub fn standard_conditions(
    offline: &Dataset,
    drifted: Option<&Dataset>,
    seed: u64,
) -> Result<Vec<TestCondition>> {
    let mut out = vec![TestCondition::plain(OFFLINE, offline.clone())];
    if let Some(d) = drifted {
        out.push(TestCondition::plain(DRIFTED, d.clone()));
    }
    let mut stream = CONDITION_STREAM;
    let mut next_seed = || {
        stream += 1;
        derive_seed(seed, stream)
    };
    let mut specs = Vec::new();
    for ratio in REMOVAL_RATIOS {
        specs.push(PerturbationSpec::removal(ratio, next_seed())?);
    }
    for count in 0..=MAX_INSERTIONS {
        specs.push(PerturbationSpec::insertion(count, next_seed())?);
    }
    for spec in specs {
        out.push(TestCondition::perturbed(
            spec.perturbation.to_string(),
            offline.clone(),
            spec,
        ));
    }
    Ok(out)
}

/// A test condition with its perturbation applied.
#[derive(Clone, Debug)]
pub struct MaterializedCondition {
    pub name: String,
    pub perturbation: Option<PerturbationSpec>,
    pub dataset: Dataset,
}

/// Applies every perturbation once, so all variants are scored on the same
/// instances.
pub fn materialize(tests: &[TestCondition]) -> Result<Vec<MaterializedCondition>> {
    let mut out: Vec<MaterializedCondition> = Vec::with_capacity(tests.len());
    for t in tests {
        if out.iter().any(|c| c.name == t.name) {
            return Err(BenchError::DuplicateCondition(t.name.clone()));
        }
        if t.dataset.is_empty() {
            return Err(BenchError::Config(format!(
                "test condition {:?} has no instances",
                t.name
            )));
        }
        let dataset = match &t.perturbation {
            Some(spec) => spec.apply(&t.dataset)?,
            None => t.dataset.clone(),
        };
        out.push(MaterializedCondition {
            name: t.name.clone(),
            perturbation: t.perturbation,
            dataset,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Shared by all variants; `train.seed` is replaced per training run.
    pub train: TrainConfig,
    /// One training run per variant and seed; cells report the median.
    pub seeds: Vec<u64>,
    pub baseline_condition: String,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            seeds: vec![0, 1, 2],
            baseline_condition: OFFLINE.into(),
        }
    }
}

/// Training seed of grid variant `variant_index` in the run for `seed`.
pub fn training_seed(seed: u64, variant_index: usize) -> u64 {
    derive_seed(seed, TRAIN_STREAM + variant_index as u64)
}

/// The baseline variant: sequence encoder, BCE, no augmentation.
pub fn baseline_variant() -> VariantSpec {
    VariantSpec::grid()[0]
}

pub struct TrainingJob<'a> {
    pub variant: VariantSpec,
    pub replicate: usize,
    pub seed: u64,
    pub dataset: &'a Dataset,
    /// Shared config with `seed` already set for this run.
    pub config: &'a TrainConfig,
}

pub struct Trained<R> {
    pub router: R,
    pub epoch_losses: Vec<f64>,
}

pub fn train_ranker(job: &TrainingJob<'_>) -> Result<Trained<Ranker>> {
    let out = train(job.variant, job.dataset, job.config)?;
    Ok(Trained {
        router: out.model,
        epoch_losses: out.epoch_losses,
    })
}

/// Trains and evaluates all 12 variants with [`train_ranker`].
pub fn run_grid(
    train1: &Dataset,
    train2: &Dataset,
    tests: &[TestCondition],
    config: &GridConfig,
) -> Result<EvaluationReport> {
    run_grid_with(train1, train2, tests, config, train_ranker)
}

fn max_token(data: &Dataset) -> Option<u32> {
    data.instances
        .iter()
        .flat_map(|i| i.hypotheses.iter())
        .flat_map(|h| h.utterance.iter().copied())
        .max()
}

/// Grid with a caller-supplied trainer. No-aug variants train on `train1`,
/// augmented variants on `train2`.
pub fn run_grid_with<R, F>(
    train1: &Dataset,
    train2: &Dataset,
    tests: &[TestCondition],
    config: &GridConfig,
    mut trainer: F,
) -> Result<EvaluationReport>
where
    R: Router,
    F: FnMut(&TrainingJob<'_>) -> Result<Trained<R>>,
{
    if config.seeds.is_empty() {
        return Err(BenchError::Config("at least one seed is required".into()));
    }
    if train1.is_empty() || train2.is_empty() {
        return Err(BenchError::Config("training sets must be non-empty".into()));
    }
    if !tests.iter().any(|t| t.name == config.baseline_condition) {
        return Err(BenchError::UnknownCondition(
            config.baseline_condition.clone(),
        ));
    }
    let conditions = materialize(tests)?;

    // Token tables must cover every test utterance, not only training ones.
    let mut effective = config.clone();
    if effective.train.token_vocab.is_none() {
        let top = [train1, train2]
            .into_iter()
            .chain(conditions.iter().map(|c| &c.dataset))
            .filter_map(max_token)
            .max()
            .unwrap_or(0);
        effective.train.token_vocab = Some(top as usize + 1);
    }

    let variants = VariantSpec::grid();
    let mut accuracies = vec![vec![Vec::new(); conditions.len()]; variants.len()];
    let mut training = Vec::new();
    for (vi, &variant) in variants.iter().enumerate() {
        let dataset = if variant.augmented { train2 } else { train1 };
        for (replicate, &base) in effective.seeds.iter().enumerate() {
            let seed = training_seed(base, vi);
            let train_config = TrainConfig {
                seed,
                ..effective.train.clone()
            };
            let job = TrainingJob {
                variant,
                replicate,
                seed,
                dataset,
                config: &train_config,
            };
            let wrap = |e| BenchError::Training {
                variant,
                seed,
                source: Box::new(e),
            };
            let trained = trainer(&job).map_err(wrap)?;
            for (ci, cond) in conditions.iter().enumerate() {
                let acc = accuracy(&trained.router, &cond.dataset).map_err(wrap)?;
                accuracies[vi][ci].push(acc);
            }
            training.push(TrainingRecord {
                variant,
                replicate,
                seed,
                dataset: dataset.provenance.clone(),
                instances: dataset.len(),
                epoch_losses: trained.epoch_losses,
            });
        }
    }

    let summaries = conditions
        .iter()
        .map(|c| {
            let stats = c.dataset.stats();
            ConditionSummary {
                name: c.name.clone(),
                perturbation: c.perturbation,
                provenance: c.dataset.provenance.clone(),
                instances: stats.instances,
                mean_hypotheses: stats.mean_hypotheses,
            }
        })
        .collect();
    let mut seed_accuracies = Vec::new();
    for (vi, &variant) in variants.iter().enumerate() {
        for (ci, cond) in conditions.iter().enumerate() {
            seed_accuracies.push((variant, cond.name.clone(), accuracies[vi][ci].clone()));
        }
    }
    let metadata = ReportMetadata {
        created_at: chrono::Utc::now().to_rfc3339(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seeds: effective.seeds.clone(),
        config: effective.clone(),
        train1: train1.provenance.clone(),
        train2: train2.provenance.clone(),
    };
    let baseline = BaselineKey {
        variant: baseline_variant(),
        condition: effective.baseline_condition.clone(),
    };
    EvaluationReport::assemble(metadata, baseline, summaries, seed_accuracies, training)
}
