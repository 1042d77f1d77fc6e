//! Domain model of list-wise skill routing and the data pipelines around
//! it: dataset files, a synthetic ontology world with subscription drift,
//! and noise-injection augmentation of training data.

pub mod augment;
pub mod domain;
pub mod io;
pub mod rng;
pub mod validate;
pub mod world;

pub use domain::{
    Condition, Dataset, DatasetStats, DomainError, Hypothesis, Interpretation, InterpretationGroup,
    Ontology, RoutingInstance, SkillId, SkillSpace, Subscription,
};
pub use validate::{validate_dataset, ValidationReport, Violation, ViolationKind};
