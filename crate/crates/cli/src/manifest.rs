//! Run manifests: the resolved invocation, the effective config and
//! checksums of every input and output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use routelab_bench::{Format, PerturbationSpec};
use routelab_core::io::write_atomic;
use routelab_ranker::VariantSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// A subcommand with all input paths resolved to absolute paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Invocation {
    GenData,
    Augment {
        input: PathBuf,
    },
    Train {
        variant: VariantSpec,
        train: PathBuf,
    },
    Eval {
        checkpoint: PathBuf,
        test: PathBuf,
    },
    Perturb {
        input: PathBuf,
        perturbation: PerturbationSpec,
    },
    Grid {
        train1: PathBuf,
        train2: PathBuf,
        test1: PathBuf,
        drifted: PathBuf,
    },
    Report {
        input: PathBuf,
        format: Format,
    },
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GenData => "gen-data",
            Self::Augment { .. } => "augment",
            Self::Train { .. } => "train",
            Self::Eval { .. } => "eval",
            Self::Perturb { .. } => "perturb",
            Self::Grid { .. } => "grid",
            Self::Report { .. } => "report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDigest {
    /// Relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
    /// False for files that embed wall-clock timestamps.
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    pub created_at: String,
    pub invocation: Invocation,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn manifest_path(out: &Path, command: &str) -> PathBuf {
    out.join(format!("manifest-{command}.json"))
}

impl Manifest {
    pub fn write(&self, out: &Path) -> anyhow::Result<PathBuf> {
        let path = manifest_path(out, self.invocation.name());
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }
}
