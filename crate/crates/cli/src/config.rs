use std::path::{Path, PathBuf};

use anyhow::Context;
use routelab_core::augment::AugmentConfig;
use routelab_core::rng::derive_seed;
use routelab_core::world::WorldConfig;
use routelab_ranker::TrainConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_OUT: &str = "routelab-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train_instances: usize,
    pub test_instances: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            train_instances: 50_000,
            test_instances: 5_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSection {
    pub p_unsubscribe: f64,
    /// `None` calibrates the probability to `target_insertions`.
    pub p_new_subscription: Option<f64>,
    /// Mean newly proposed hypotheses per test instance.
    pub target_insertions: f64,
}

impl Default for DriftSection {
    fn default() -> Self {
        Self {
            p_unsubscribe: 0.1,
            p_new_subscription: None,
            target_insertions: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Replicate labels; each is mixed with the global seed.
    pub seeds: Vec<u64>,
    pub baseline_condition: String,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            baseline_condition: routelab_bench::OFFLINE.into(),
        }
    }
}

/// Every parameter of a run. Unknown keys are rejected at any depth.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub world: WorldConfig,
    pub data: DataSection,
    pub drift: DriftSection,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub grid: GridSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Self = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.world.validate()?;
        anyhow::ensure!(
            self.data.train_instances > 0 && self.data.test_instances > 0,
            "data: instance counts must be positive"
        );
        anyhow::ensure!(
            (0.0..=1.0).contains(&self.drift.p_unsubscribe),
            "drift.p_unsubscribe must lie in [0, 1]"
        );
        if let Some(p) = self.drift.p_new_subscription {
            anyhow::ensure!(
                (0.0..=1.0).contains(&p),
                "drift.p_new_subscription must lie in [0, 1]"
            );
        }
        anyhow::ensure!(
            self.drift.target_insertions >= 0.0,
            "drift.target_insertions must be non-negative"
        );
        anyhow::ensure!(self.train.epochs > 0, "train.epochs must be positive");
        anyhow::ensure!(
            self.train.batch_size > 0,
            "train.batch_size must be positive"
        );
        anyhow::ensure!(!self.grid.seeds.is_empty(), "grid.seeds must not be empty");
        Ok(())
    }
}

/// Seed stream of each pipeline stage, all derived from the global seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Ontology = 1,
    Train1 = 2,
    Test1 = 3,
    Drift = 4,
    Augment = 5,
    Perturb = 6,
    Train = 7,
    Grid = 8,
    Conditions = 9,
}

pub fn stage_seed(global: u64, stream: Stream) -> u64 {
    derive_seed(global, stream as u64)
}
