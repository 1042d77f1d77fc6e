//! Dataset and ontology files.
//!
//! A dataset is a JSON-lines file with one instance per line plus a sidecar
//! header `<stem>.header.json` next to it holding the skill space, the
//! context length and the provenance label.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Dataset, DomainError, Hypothesis, Interpretation, Ontology, RoutingInstance, SkillId,
    SkillSpace,
};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Line {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Domain {
        path: PathBuf,
        #[source]
        source: DomainError,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    skills: Vec<SkillId>,
    context_len: usize,
    provenance: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceLine {
    id: String,
    utterance: Vec<u32>,
    gold_index: usize,
    hypotheses: Vec<HypothesisLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisLine {
    intent: String,
    slots: Vec<(String, String)>,
    skill: SkillId,
    context: Vec<u8>,
}

/// Sidecar header path: `dir/train1.jsonl` -> `dir/train1.header.json`.
pub fn header_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.header.json"))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FileError> {
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, FileError> {
    let hpath = header_path(path);
    let header_text = fs::read_to_string(&hpath).map_err(io_err(&hpath))?;
    let header: Header = serde_json::from_str(&header_text).map_err(|e| FileError::Json {
        path: hpath.clone(),
        message: e.to_string(),
    })?;
    let skill_space = SkillSpace::new(header.skills).map_err(|source| FileError::Domain {
        path: hpath.clone(),
        source,
    })?;

    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut instances = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let line_err = |message: String| FileError::Line {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec: InstanceLine = serde_json::from_str(raw).map_err(|e| line_err(e.to_string()))?;
        let mut hypotheses = Vec::with_capacity(rec.hypotheses.len());
        for h in rec.hypotheses {
            if !skill_space.contains(&h.skill) {
                return Err(line_err(format!("unknown skill {:?}", h.skill.as_str())));
            }
            let interpretation =
                Interpretation::new(h.intent, h.slots).map_err(|e| line_err(e.to_string()))?;
            hypotheses.push(Hypothesis {
                utterance: rec.utterance.clone(),
                interpretation,
                skill: h.skill,
                context: h.context,
            });
        }
        instances.push(RoutingInstance {
            id: rec.id,
            hypotheses,
            gold_index: rec.gold_index,
        });
    }
    Ok(Dataset {
        instances,
        skill_space,
        context_len: header.context_len,
        provenance: header.provenance,
    })
}

/// Serialized JSON-lines body of a dataset.
pub fn dataset_lines(dataset: &Dataset) -> String {
    let mut out = String::new();
    for inst in &dataset.instances {
        let rec = InstanceLine {
            id: inst.id.clone(),
            utterance: inst.utterance().to_vec(),
            gold_index: inst.gold_index,
            hypotheses: inst
                .hypotheses
                .iter()
                .map(|h| HypothesisLine {
                    intent: h.interpretation.intent().to_string(),
                    slots: h.interpretation.slots().to_vec(),
                    skill: h.skill.clone(),
                    context: h.context.clone(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("instance serializes"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), FileError> {
    let header = Header {
        skills: dataset.skill_space.skills().to_vec(),
        context_len: dataset.context_len,
        provenance: dataset.provenance.clone(),
    };
    let mut header_json = serde_json::to_string_pretty(&header).expect("header serializes");
    header_json.push('\n');
    write_atomic(&header_path(path), header_json.as_bytes())?;
    write_atomic(path, dataset_lines(dataset).as_bytes())
}

pub fn read_ontology(path: &Path) -> Result<Ontology, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| FileError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_ontology(ontology: &Ontology, path: &Path) -> Result<(), FileError> {
    let mut json = serde_json::to_string_pretty(ontology).expect("ontology serializes");
    json.push('\n');
    write_atomic(path, json.as_bytes())
}
