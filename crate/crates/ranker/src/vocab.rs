//! Lookup tables from symbolic hypothesis fields to embedding rows.

use std::collections::HashMap;

use routelab_autodiff::Tensor;
use routelab_core::{Dataset, Hypothesis, RoutingInstance, SkillId, SkillSpace};
use serde::{Deserialize, Serialize};

use crate::error::RankerError;

/// Row 0 of the intent and slot-name tables; used for names not seen in
/// training.
pub const UNK: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "VocabFile", try_from = "VocabFile")]
pub struct Vocab {
    token_count: usize,
    intents: Vec<String>,
    slot_names: Vec<String>,
    skills: SkillSpace,
    context_len: usize,
    intent_index: HashMap<String, usize>,
    slot_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    token_count: usize,
    intents: Vec<String>,
    slot_names: Vec<String>,
    skills: Vec<SkillId>,
    context_len: usize,
}

impl From<Vocab> for VocabFile {
    fn from(v: Vocab) -> Self {
        VocabFile {
            token_count: v.token_count,
            intents: v.intents,
            slot_names: v.slot_names,
            skills: v.skills.skills().to_vec(),
            context_len: v.context_len,
        }
    }
}

impl TryFrom<VocabFile> for Vocab {
    type Error = String;

    fn try_from(f: VocabFile) -> Result<Self, String> {
        let skills = SkillSpace::new(f.skills).map_err(|e| e.to_string())?;
        Vocab::from_parts(
            f.token_count,
            f.intents,
            f.slot_names,
            skills,
            f.context_len,
        )
    }
}

fn index(names: &[String]) -> HashMap<String, usize> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect()
}

impl Vocab {
    /// `intents` and `slot_names` must start with [`UNK`].
    pub fn from_parts(
        token_count: usize,
        intents: Vec<String>,
        slot_names: Vec<String>,
        skills: SkillSpace,
        context_len: usize,
    ) -> Result<Self, String> {
        if token_count == 0 {
            return Err("token table must have at least one row".into());
        }
        for (label, names) in [("intent", &intents), ("slot name", &slot_names)] {
            if names.first().map(String::as_str) != Some(UNK) {
                return Err(format!("{label} table must start with {UNK:?}"));
            }
            if index(names).len() != names.len() {
                return Err(format!("duplicate {label} in vocabulary"));
            }
        }
        Ok(Self {
            token_count,
            intent_index: index(&intents),
            slot_index: index(&slot_names),
            intents,
            slot_names,
            skills,
            context_len,
        })
    }

    /// Vocabulary covering every name in `data`. The token table has
    /// `token_count` rows, or one past the largest token id in `data`.
    pub fn from_dataset(data: &Dataset, token_count: Option<usize>) -> Result<Self, RankerError> {
        let mut intents = std::collections::BTreeSet::new();
        let mut slots = std::collections::BTreeSet::new();
        let mut max_token = 0u32;
        for inst in &data.instances {
            max_token = inst.utterance().iter().copied().fold(max_token, u32::max);
            for h in &inst.hypotheses {
                intents.insert(h.interpretation.intent().to_string());
                slots.extend(h.interpretation.slot_names().map(str::to_string));
            }
        }
        let seen = max_token as usize + 1;
        let token_count = token_count.unwrap_or(seen);
        if token_count < seen {
            return Err(RankerError::TokenOutOfRange {
                token: max_token,
                size: token_count,
            });
        }
        let with_unk = |set: std::collections::BTreeSet<String>| {
            std::iter::once(UNK.to_string())
                .chain(set.into_iter().filter(|n| n != UNK))
                .collect::<Vec<_>>()
        };
        Self::from_parts(
            token_count,
            with_unk(intents),
            with_unk(slots),
            data.skill_space.clone(),
            data.context_len,
        )
        .map_err(RankerError::Config)
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    pub fn skills(&self) -> &SkillSpace {
        &self.skills
    }

    pub fn context_len(&self) -> usize {
        self.context_len
    }

    pub fn intent_row(&self, intent: &str) -> usize {
        self.intent_index.get(intent).copied().unwrap_or(0)
    }

    pub fn slot_row(&self, slot: &str) -> usize {
        self.slot_index.get(slot).copied().unwrap_or(0)
    }

    /// Encodes a hypothesis list. The utterance is taken from the first
    /// hypothesis.
    pub fn encode(&self, hypotheses: &[Hypothesis]) -> Result<EncodedList, RankerError> {
        let first = hypotheses.first().ok_or(RankerError::EmptyHypotheses)?;
        let tokens = first
            .utterance
            .iter()
            .map(|&t| {
                if (t as usize) < self.token_count {
                    Ok(t as usize)
                } else {
                    Err(RankerError::TokenOutOfRange {
                        token: t,
                        size: self.token_count,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let n = hypotheses.len();
        let mut intents = Vec::with_capacity(n);
        let mut slots = Vec::with_capacity(n);
        let mut skills = Vec::with_capacity(n);
        let mut context = Vec::with_capacity(n * self.context_len);
        for h in hypotheses {
            intents.push(vec![self.intent_row(h.interpretation.intent())]);
            slots.push(
                h.interpretation
                    .slot_names()
                    .map(|s| self.slot_row(s))
                    .collect(),
            );
            skills
                .push(vec![self.skills.index_of(&h.skill).ok_or_else(|| {
                    RankerError::UnknownSkill(h.skill.to_string())
                })?]);
            if h.context.len() != self.context_len {
                return Err(RankerError::ContextLength {
                    got: h.context.len(),
                    expected: self.context_len,
                });
            }
            context.extend(h.context.iter().map(|&b| f64::from(b)));
        }
        Ok(EncodedList {
            tokens,
            intents,
            slots,
            skills,
            context: Tensor::matrix(n, self.context_len, context)?,
        })
    }

    pub fn encode_instance(&self, inst: &RoutingInstance) -> Result<EncodedInstance, RankerError> {
        if inst.gold_index >= inst.len() {
            return Err(RankerError::GoldOutOfRange {
                index: inst.gold_index,
                len: inst.len(),
            });
        }
        Ok(EncodedInstance {
            list: self.encode(&inst.hypotheses)?,
            gold: inst.gold_index,
        })
    }
}

/// Embedding-row indices for one hypothesis list.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedList {
    pub tokens: Vec<usize>,
    /// One single-element group per hypothesis.
    pub intents: Vec<Vec<usize>>,
    /// Slot-name rows per hypothesis; may be empty.
    pub slots: Vec<Vec<usize>>,
    pub skills: Vec<Vec<usize>>,
    /// n x context_len, 0/1 entries.
    pub context: Tensor,
}

impl EncodedList {
    pub fn len(&self) -> usize {
        self.intents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intents.is_empty()
    }

    /// Reorders hypotheses so that row `i` of the result is row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> EncodedList {
        let pick = |v: &Vec<Vec<usize>>| order.iter().map(|&i| v[i].clone()).collect();
        let cols = self.context.cols();
        let mut ctx = Vec::with_capacity(order.len() * cols);
        for &i in order {
            ctx.extend_from_slice(self.context.row_slice(i));
        }
        EncodedList {
            tokens: self.tokens.clone(),
            intents: pick(&self.intents),
            slots: pick(&self.slots),
            skills: pick(&self.skills),
            context: Tensor::matrix(order.len(), cols, ctx).expect("permutation keeps shape"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInstance {
    pub list: EncodedList,
    pub gold: usize,
}
