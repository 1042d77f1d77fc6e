use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::domain::{Dataset, RoutingInstance, SkillSpace};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyHypotheses,
    GoldIndexOutOfRange,
    UtteranceMismatch,
    DuplicateCandidate,
    UnknownSkill,
    ContextLength,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::EmptyHypotheses => "empty hypothesis list",
            ViolationKind::GoldIndexOutOfRange => "gold index out of range",
            ViolationKind::UtteranceMismatch => "hypotheses disagree on utterance",
            ViolationKind::DuplicateCandidate => "duplicate candidate",
            ViolationKind::UnknownSkill => "unknown skill",
            ViolationKind::ContextLength => "context length mismatch",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub instance_id: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.instance_id, self.kind, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every invariant violation of every instance. Never mutates its input.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let violations = dataset
        .instances
        .iter()
        .flat_map(|inst| validate_instance(inst, &dataset.skill_space, dataset.context_len))
        .collect();
    ValidationReport { violations }
}

pub fn validate_instance(
    inst: &RoutingInstance,
    skills: &SkillSpace,
    context_len: usize,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, detail: String| {
        out.push(Violation {
            instance_id: inst.id.clone(),
            kind,
            detail,
        })
    };
    let n = inst.hypotheses.len();
    if n == 0 {
        push(ViolationKind::EmptyHypotheses, "no hypotheses".into());
    }
    if inst.gold_index >= n {
        push(
            ViolationKind::GoldIndexOutOfRange,
            format!("gold_index {} with {n} hypotheses", inst.gold_index),
        );
    }
    let utterance = inst.utterance();
    let mut seen = HashSet::new();
    for (i, h) in inst.hypotheses.iter().enumerate() {
        if h.utterance != utterance {
            push(ViolationKind::UtteranceMismatch, format!("hypothesis {i}"));
        }
        if !seen.insert((&h.interpretation, &h.skill)) {
            push(
                ViolationKind::DuplicateCandidate,
                format!(
                    "hypothesis {i}: intent {:?} skill {}",
                    h.interpretation.intent(),
                    h.skill
                ),
            );
        }
        if !skills.contains(&h.skill) {
            push(
                ViolationKind::UnknownSkill,
                format!("hypothesis {i}: {}", h.skill),
            );
        }
        if h.context.len() != context_len {
            push(
                ViolationKind::ContextLength,
                format!(
                    "hypothesis {i}: {} signals, expected {context_len}",
                    h.context.len()
                ),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Hypothesis, Interpretation, SkillId};

    fn hyp(intent: &str, skill: &str) -> Hypothesis {
        Hypothesis {
            utterance: vec![1, 2, 3],
            interpretation: Interpretation::intent_only(intent).unwrap(),
            skill: SkillId::new(skill),
            context: vec![0, 1],
        }
    }

    fn dataset(instances: Vec<RoutingInstance>) -> Dataset {
        Dataset {
            instances,
            skill_space: SkillSpace::new(["a", "b", "c"].map(SkillId::new)).unwrap(),
            context_len: 2,
            provenance: "test".into(),
        }
    }

    fn good(id: &str) -> RoutingInstance {
        RoutingInstance {
            id: id.into(),
            hypotheses: vec![hyp("I", "a"), hyp("I", "b"), hyp("J", "a")],
            gold_index: 1,
        }
    }

    #[test]
    fn well_formed_dataset_is_clean() {
        let d = dataset(vec![good("x"), good("y"), good("z")]);
        assert!(validate_dataset(&d).is_valid());
    }

    #[test]
    fn gold_index_at_length() {
        let mut bad = good("x");
        bad.gold_index = 3;
        let report = validate_dataset(&dataset(vec![bad]));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(
            report.violations[0].kind.to_string(),
            "gold index out of range"
        );
        assert_eq!(report.violations[0].instance_id, "x");
    }

    #[test]
    fn duplicate_candidate() {
        let mut bad = good("x");
        bad.hypotheses.push(hyp("I", "b"));
        let report = validate_dataset(&dataset(vec![bad]));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind.to_string(), "duplicate candidate");
    }

    #[test]
    fn other_violations() {
        let mut bad = good("x");
        bad.hypotheses[1].utterance = vec![9];
        bad.hypotheses[2].skill = SkillId::new("zzz");
        bad.hypotheses[0].context = vec![1];
        let empty = RoutingInstance {
            id: "e".into(),
            hypotheses: vec![],
            gold_index: 0,
        };
        let kinds: Vec<_> = validate_dataset(&dataset(vec![bad, empty]))
            .violations
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert_eq!(
            kinds,
            [
                ViolationKind::ContextLength,
                ViolationKind::UtteranceMismatch,
                ViolationKind::UnknownSkill,
                ViolationKind::EmptyHypotheses,
                ViolationKind::GoldIndexOutOfRange
            ]
        );
    }

    #[test]
    fn pure() {
        let mut bad = good("x");
        bad.gold_index = 10;
        let d = dataset(vec![bad, good("y")]);
        let before = d.clone();
        assert_eq!(validate_dataset(&d), validate_dataset(&d));
        assert_eq!(d, before);
    }
}
