use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Params, Result, Tensor, TensorError};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u32,
    params: BTreeMap<String, Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// Writes `params` as JSON (`name -> shape + flat values`), through a
/// temporary file renamed into place.
pub fn write_params(params: &Params, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        params: params
            .iter()
            .map(|(_, name, t)| {
                (
                    name.to_string(),
                    Entry {
                        shape: t.shape().to_vec(),
                        values: t.values().to_vec(),
                    },
                )
            })
            .collect(),
    };
    let json = serde_json::to_string(&file).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, json)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a checkpoint into an existing parameter layout. Every parameter
/// of `params` must be present with a matching shape; extra entries are an
/// error.
pub fn read_params(params: &mut Params, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    if file.params.len() != params.len() {
        return Err(TensorError::Checkpoint(format!(
            "expected {} tensors, found {}",
            params.len(),
            file.params.len()
        )));
    }
    for (name, entry) in file.params {
        params.set(&name, Tensor::new(entry.shape, entry.values)?)?;
    }
    Ok(())
}
