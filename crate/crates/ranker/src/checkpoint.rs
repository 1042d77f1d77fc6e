//! A checkpoint directory holds `params.json` (parameter file) and
//! `variant.json` (descriptor needed to rebuild the model skeleton).

use std::fs;
use std::path::{Path, PathBuf};

use routelab_autodiff::{read_params, write_params};
use routelab_core::io::write_atomic;
use serde::{Deserialize, Serialize};

use crate::config::{Dims, EncoderKind, LossKind, VariantSpec};
use crate::error::RankerError;
use crate::model::Ranker;
use crate::vocab::Vocab;

pub const PARAMS_FILE: &str = "params.json";
pub const DESCRIPTOR_FILE: &str = "variant.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantDescriptor {
    pub encoder: EncoderKind,
    pub loss: LossKind,
    pub augmented: bool,
    pub dims: Dims,
    pub seed: u64,
    pub parameter_count: usize,
    pub vocab: Vocab,
}

impl VariantDescriptor {
    pub fn of(model: &Ranker) -> Self {
        let spec = model.spec();
        Self {
            encoder: spec.encoder,
            loss: spec.loss,
            augmented: spec.augmented,
            dims: *model.dims(),
            seed: model.seed(),
            parameter_count: model.params().scalar_count(),
            vocab: model.vocab().clone(),
        }
    }

    pub fn spec(&self) -> VariantSpec {
        VariantSpec {
            encoder: self.encoder,
            loss: self.loss,
            augmented: self.augmented,
        }
    }
}

fn ckpt_err(path: &Path, message: impl ToString) -> RankerError {
    RankerError::Checkpoint {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

pub fn save(model: &Ranker, dir: &Path) -> Result<(), RankerError> {
    fs::create_dir_all(dir).map_err(|e| ckpt_err(dir, e))?;
    let mut json = serde_json::to_string_pretty(&VariantDescriptor::of(model))
        .map_err(|e| ckpt_err(dir, e))?;
    json.push('\n');
    let desc = dir.join(DESCRIPTOR_FILE);
    write_atomic(&desc, json.as_bytes()).map_err(|e| ckpt_err(&desc, e))?;
    let params = dir.join(PARAMS_FILE);
    write_params(model.params(), &params).map_err(|e| ckpt_err(&params, e))
}

pub fn load(dir: &Path) -> Result<Ranker, RankerError> {
    let desc_path: PathBuf = dir.join(DESCRIPTOR_FILE);
    if !desc_path.is_file() {
        return Err(RankerError::CheckpointNotFound(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&desc_path).map_err(|e| ckpt_err(&desc_path, e))?;
    let desc: VariantDescriptor =
        serde_json::from_str(&text).map_err(|e| ckpt_err(&desc_path, e))?;
    let mut model = Ranker::new(desc.spec(), desc.dims, desc.vocab, desc.seed);
    let params = dir.join(PARAMS_FILE);
    if !params.is_file() {
        return Err(RankerError::CheckpointNotFound(dir.to_path_buf()));
    }
    read_params(model.params_mut(), &params).map_err(|e| ckpt_err(&params, e))?;
    Ok(model)
}
