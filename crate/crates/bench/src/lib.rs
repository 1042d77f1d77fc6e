//! Robustness benchmark for hypothesis rankers: the accuracy metric,
//! removal and insertion perturbations, the 12-variant grid and its report.

mod error;
pub mod findings;
pub mod grid;
pub mod metric;
pub mod perturb;
pub mod report;

pub use error::BenchError;
pub use findings::{check_findings, render_findings, Finding};
pub use grid::{
    baseline_variant, materialize, run_grid, run_grid_with, standard_conditions, train_ranker,
    training_seed, GridConfig, MaterializedCondition, TestCondition, Trained, TrainingJob, DRIFTED,
    OFFLINE, REMOVAL_RATIOS,
};
pub use metric::{accuracy, Router};
pub use perturb::{
    perturb_insertion, perturb_removal, Perturbation, PerturbationSpec, MAX_INSERTIONS,
    MAX_REMOVAL_RATIO,
};
pub use report::{render_report, EvaluationReport, Format};
