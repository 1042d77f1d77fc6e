//! Routing vocabulary: interpretations, hypotheses, instances, skill spaces,
//! ontologies and datasets.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("interpretation intent must be non-empty")]
    EmptyIntent,
    #[error("duplicate slot name {0:?} in interpretation")]
    DuplicateSlot(String),
    #[error("skill space non-empty: a skill space needs at least one skill")]
    EmptySkillSpace,
    #[error("duplicate skill {0:?} in skill space")]
    DuplicateSkill(String),
    #[error("unknown skill {skill:?} ({context})")]
    UnknownSkill { skill: String, context: String },
    #[error("intent {0:?} has no subscriptions")]
    NoSubscribers(String),
    #[error("skill {skill:?} subscribes to intent {intent:?} more than once")]
    DuplicateSubscription { intent: String, skill: String },
}

/// Identifier of a skill, the application that finally serves a request.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillId(String);

impl SkillId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An NLU interpretation: intent plus slots.
///
/// Slots are stored sorted by slot name, so equality and hashing ignore
/// the order in which slots were supplied.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interpretation {
    intent: String,
    slots: Vec<(String, String)>,
}

impl Interpretation {
    pub fn new(
        intent: impl Into<String>,
        mut slots: Vec<(String, String)>,
    ) -> Result<Self, DomainError> {
        let intent = intent.into();
        if intent.is_empty() {
            return Err(DomainError::EmptyIntent);
        }
        slots.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = slots.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(DomainError::DuplicateSlot(w[0].0.clone()));
        }
        Ok(Self { intent, slots })
    }

    /// Interpretation without slots.
    pub fn intent_only(intent: impl Into<String>) -> Result<Self, DomainError> {
        Self::new(intent, Vec::new())
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn slots(&self) -> &[(String, String)] {
        &self.slots
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|(n, _)| n.as_str())
    }
}

/// One routing candidate: utterance, interpretation, proposed skill and
/// contextual signals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    /// Pre-tokenized utterance (token ids).
    pub utterance: Vec<u32>,
    pub interpretation: Interpretation,
    pub skill: SkillId,
    /// Device/context signals, fixed length per dataset.
    pub context: Vec<u8>,
}

impl Hypothesis {
    /// Copy of this hypothesis proposing a different skill.
    pub fn with_skill(&self, skill: SkillId) -> Self {
        Self {
            skill,
            ..self.clone()
        }
    }
}

/// A hypothesis list and the index of its golden (ground-truth) entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingInstance {
    pub id: String,
    pub hypotheses: Vec<Hypothesis>,
    pub gold_index: usize,
}

/// Hypotheses of one instance that share an interpretation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterpretationGroup {
    pub interpretation: Interpretation,
    /// Indices into the instance's hypothesis list, in list order.
    pub members: Vec<usize>,
}

impl RoutingInstance {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn gold(&self) -> Option<&Hypothesis> {
        self.hypotheses.get(self.gold_index)
    }

    pub fn utterance(&self) -> &[u32] {
        self.hypotheses.first().map_or(&[], |h| &h.utterance)
    }

    /// Groups by interpretation, ordered by first appearance.
    pub fn groups(&self) -> Vec<InterpretationGroup> {
        let mut groups: Vec<InterpretationGroup> = Vec::new();
        for (i, h) in self.hypotheses.iter().enumerate() {
            match groups
                .iter_mut()
                .find(|g| g.interpretation == h.interpretation)
            {
                Some(g) => g.members.push(i),
                None => groups.push(InterpretationGroup {
                    interpretation: h.interpretation.clone(),
                    members: vec![i],
                }),
            }
        }
        groups
    }
}

/// The set of all known skills, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkillSpace {
    skills: Vec<SkillId>,
}

impl SkillSpace {
    pub fn new(skills: impl IntoIterator<Item = SkillId>) -> Result<Self, DomainError> {
        let mut skills: Vec<SkillId> = skills.into_iter().collect();
        if skills.is_empty() {
            return Err(DomainError::EmptySkillSpace);
        }
        skills.sort();
        if let Some(w) = skills.windows(2).find(|w| w[0] == w[1]) {
            return Err(DomainError::DuplicateSkill(w[0].to_string()));
        }
        Ok(Self { skills })
    }

    pub fn contains(&self, skill: &SkillId) -> bool {
        self.index_of(skill).is_some()
    }

    /// Position in sorted order.
    pub fn index_of(&self, skill: &SkillId) -> Option<usize> {
        self.skills.binary_search(skill).ok()
    }

    pub fn skills(&self) -> &[SkillId] {
        &self.skills
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }
}

/// Subscription predicate over context signals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub signal_index: usize,
    pub required_value: u8,
}

impl Condition {
    pub fn accepts(&self, context: &[u8]) -> bool {
        context.get(self.signal_index) == Some(&self.required_value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subscription {
    pub skill: SkillId,
    /// `None` means the subscription always applies.
    pub condition: Option<Condition>,
}

impl Subscription {
    pub fn accepts(&self, context: &[u8]) -> bool {
        self.condition.is_none_or(|c| c.accepts(context))
    }
}

/// Shared ontology: which skills subscribe to which intents, and under
/// which context conditions.
///
/// Subscriptions of one intent are kept in lexicographic skill order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OntologyFile", into = "OntologyFile")]
pub struct Ontology {
    skill_space: SkillSpace,
    subscriptions: BTreeMap<String, Vec<Subscription>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyFile {
    skills: Vec<SkillId>,
    subscriptions: BTreeMap<String, Vec<Subscription>>,
}

impl TryFrom<OntologyFile> for Ontology {
    type Error = DomainError;

    fn try_from(file: OntologyFile) -> Result<Self, DomainError> {
        Ontology::new(SkillSpace::new(file.skills)?, file.subscriptions)
    }
}

impl From<Ontology> for OntologyFile {
    fn from(o: Ontology) -> Self {
        Self {
            skills: o.skill_space.skills,
            subscriptions: o.subscriptions,
        }
    }
}

impl Ontology {
    pub fn new(
        skill_space: SkillSpace,
        mut subscriptions: BTreeMap<String, Vec<Subscription>>,
    ) -> Result<Self, DomainError> {
        for (intent, subs) in subscriptions.iter_mut() {
            if subs.is_empty() {
                return Err(DomainError::NoSubscribers(intent.clone()));
            }
            if intent.is_empty() {
                return Err(DomainError::EmptyIntent);
            }
            subs.sort_by(|a, b| a.skill.cmp(&b.skill));
            if let Some(w) = subs.windows(2).find(|w| w[0].skill == w[1].skill) {
                return Err(DomainError::DuplicateSubscription {
                    intent: intent.clone(),
                    skill: w[0].skill.to_string(),
                });
            }
            if let Some(s) = subs.iter().find(|s| !skill_space.contains(&s.skill)) {
                return Err(DomainError::UnknownSkill {
                    skill: s.skill.to_string(),
                    context: format!("subscription of intent {intent:?}"),
                });
            }
        }
        Ok(Self {
            skill_space,
            subscriptions,
        })
    }

    pub fn skill_space(&self) -> &SkillSpace {
        &self.skill_space
    }

    pub fn intents(&self) -> impl Iterator<Item = &str> {
        self.subscriptions.keys().map(String::as_str)
    }

    pub fn subscribers(&self, intent: &str) -> Option<&[Subscription]> {
        self.subscriptions.get(intent).map(Vec::as_slice)
    }

    pub fn subscriptions(&self) -> &BTreeMap<String, Vec<Subscription>> {
        &self.subscriptions
    }

    pub fn edge_count(&self) -> usize {
        self.subscriptions.values().map(Vec::len).sum()
    }

    pub fn is_subscribed(&self, intent: &str, skill: &SkillId) -> bool {
        self.subscription(intent, skill).is_some()
    }

    pub fn subscription(&self, intent: &str, skill: &SkillId) -> Option<&Subscription> {
        self.subscriptions
            .get(intent)
            .and_then(|subs| subs.iter().find(|s| &s.skill == skill))
    }
}

/// A collection of routing instances over one skill space.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub instances: Vec<RoutingInstance>,
    pub skill_space: SkillSpace,
    pub context_len: usize,
    /// Free-text origin label such as `train1` or `test2-drifted`.
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetStats {
    pub instances: usize,
    pub hypotheses: usize,
    pub mean_hypotheses: f64,
    pub mean_interpretations: f64,
    pub distinct_intents: usize,
    pub skills: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        let hypotheses: usize = self.instances.iter().map(RoutingInstance::len).sum();
        let interpretations: usize = self.instances.iter().map(|i| i.groups().len()).sum();
        let intents: std::collections::BTreeSet<&str> = self
            .instances
            .iter()
            .flat_map(|i| i.hypotheses.iter().map(|h| h.interpretation.intent()))
            .collect();
        let n = self.instances.len().max(1) as f64;
        DatasetStats {
            instances: self.instances.len(),
            hypotheses,
            mean_hypotheses: hypotheses as f64 / n,
            mean_interpretations: interpretations as f64 / n,
            distinct_intents: intents.len(),
            skills: self.skill_space.len(),
        }
    }
}
