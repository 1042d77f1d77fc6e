//! Evaluation report, percentage-point deltas and CSV/JSON/text rendering.

use std::fmt::{self, Write};
use std::str::FromStr;

use routelab_ranker::VariantSpec;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::grid::GridConfig;
use crate::perturb::{Perturbation, PerturbationSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineKey {
    pub variant: VariantSpec,
    pub condition: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    pub perturbation: Option<PerturbationSpec>,
    pub provenance: String,
    pub instances: usize,
    pub mean_hypotheses: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: VariantSpec,
    pub condition: String,
    /// Median over training seeds.
    pub accuracy: f64,
    /// `100 * (accuracy - baseline_accuracy)`.
    pub delta_pp: f64,
    /// One entry per training seed, in seed order.
    pub seed_accuracies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub variant: VariantSpec,
    pub replicate: usize,
    pub seed: u64,
    pub dataset: String,
    pub instances: usize,
    pub epoch_losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub created_at: String,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub config: GridConfig,
    pub train1: String,
    pub train2: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub baseline: BaselineKey,
    pub baseline_accuracy: f64,
    pub conditions: Vec<ConditionSummary>,
    pub cells: Vec<Cell>,
    pub training: Vec<TrainingRecord>,
}

/// Median; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

pub fn delta_pp(accuracy: f64, baseline: f64) -> f64 {
    100.0 * (accuracy - baseline)
}

impl EvaluationReport {
    /// Builds cells from per-seed accuracies, which may arrive in any order.
    /// Cells are sorted by grid variant order, then condition order.
    pub fn assemble(
        metadata: ReportMetadata,
        baseline: BaselineKey,
        conditions: Vec<ConditionSummary>,
        seed_accuracies: Vec<(VariantSpec, String, Vec<f64>)>,
        training: Vec<TrainingRecord>,
    ) -> Result<Self, BenchError> {
        let grid = VariantSpec::grid();
        let rank = |v: &VariantSpec, c: &str| {
            let vi = grid.iter().position(|g| g == v).unwrap_or(grid.len());
            let ci = conditions
                .iter()
                .position(|s| s.name == c)
                .unwrap_or(conditions.len());
            (vi, ci)
        };
        let mut raw = seed_accuracies;
        for (_, c, accs) in &raw {
            if !conditions.iter().any(|s| &s.name == c) {
                return Err(BenchError::UnknownCondition(c.clone()));
            }
            if accs.is_empty() {
                return Err(BenchError::Config(format!("cell {c:?} has no accuracies")));
            }
        }
        raw.sort_by_key(|(v, c, _)| rank(v, c));
        let baseline_accuracy = raw
            .iter()
            .find(|(v, c, _)| *v == baseline.variant && *c == baseline.condition)
            .and_then(|(_, _, accs)| median(accs))
            .ok_or_else(|| BenchError::UnknownCondition(baseline.condition.clone()))?;
        let cells = raw
            .into_iter()
            .map(|(variant, condition, seed_accuracies)| {
                let accuracy = median(&seed_accuracies).expect("checked non-empty");
                Cell {
                    variant,
                    condition,
                    accuracy,
                    delta_pp: delta_pp(accuracy, baseline_accuracy),
                    seed_accuracies,
                }
            })
            .collect();
        Ok(Self {
            metadata,
            baseline,
            baseline_accuracy,
            conditions,
            cells,
            training,
        })
    }

    pub fn cell(&self, variant: VariantSpec, condition: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.condition == condition)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Distinct variants in cell order.
    pub fn variants(&self) -> Vec<VariantSpec> {
        let mut out: Vec<VariantSpec> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.variant) {
                out.push(c.variant);
            }
        }
        out
    }

    /// Largest gap between a stored delta and one recomputed from the
    /// stored accuracies.
    pub fn max_delta_error(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| (c.delta_pp - delta_pp(c.accuracy, self.baseline_accuracy)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Text,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Text => "text",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "text" => Ok(Self::Text),
            other => Err(format!(
                "unknown format {other:?} (expected csv, json or text)"
            )),
        }
    }
}

pub const CSV_HEADER: &str = "encoder,loss,aug,condition,accuracy,delta_pp,seed_accuracies";

pub fn render_report(report: &EvaluationReport, format: Format) -> Result<String, BenchError> {
    match format {
        Format::Csv => Ok(render_csv(report)),
        Format::Json => report.to_json(),
        Format::Text => Ok(render_text(report)),
    }
}

/// One row per cell. Floats use the shortest round-trip form so the file is
/// a lossless, byte-stable view of the report.
pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in &report.cells {
        let seeds: Vec<String> = c.seed_accuracies.iter().map(f64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.variant.encoder,
            c.variant.loss,
            c.variant.augmented,
            csv_field(&c.condition),
            c.accuracy,
            c.delta_pp,
            seeds.join(";")
        );
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Left-aligned text columns followed by right-aligned numeric columns.
pub fn text_table(header: &[String], text_cols: usize, rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < text_cols {
                    format!("{c:<w$}", w = widths[i])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

fn group_title(p: Option<&PerturbationSpec>) -> &'static str {
    match p.map(|s| s.perturbation) {
        None => "Test sets",
        Some(Perturbation::Removal { .. }) => "Hypothesis removal",
        Some(Perturbation::Insertion { .. }) => "Hypothesis insertion",
    }
}

fn column_label(c: &ConditionSummary) -> String {
    match c.perturbation.map(|s| s.perturbation) {
        None => c.name.clone(),
        Some(Perturbation::Removal { ratio }) => format!("{}%", ratio * 100.0),
        Some(Perturbation::Insertion { count }) => format!("k={count}"),
    }
}

/// Aligned tables of median accuracy and delta against the baseline, one
/// pair per condition family.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Baseline: {} on {}, accuracy {:.2}%",
        report.baseline.variant,
        report.baseline.condition,
        100.0 * report.baseline_accuracy
    );
    let _ = writeln!(
        out,
        "Cells report the median over {} training seed(s).",
        report.metadata.seeds.len()
    );
    let mut groups: Vec<(&str, Vec<&ConditionSummary>)> = Vec::new();
    for c in &report.conditions {
        let title = group_title(c.perturbation.as_ref());
        match groups.iter_mut().find(|(t, _)| *t == title) {
            Some((_, members)) => members.push(c),
            None => groups.push((title, vec![c])),
        }
    }
    let variants = report.variants();
    for (title, members) in groups {
        for (what, value) in [
            (
                "accuracy (%)",
                (|c: &Cell| format!("{:.2}", 100.0 * c.accuracy)) as fn(&Cell) -> String,
            ),
            ("delta vs baseline (pp)", |c: &Cell| {
                format!("{:+.2}", c.delta_pp)
            }),
        ] {
            let mut header: Vec<String> = ["encoder", "loss", "aug"].map(String::from).to_vec();
            header.extend(members.iter().map(|c| column_label(c)));
            let rows: Vec<Vec<String>> = variants
                .iter()
                .map(|v| {
                    let mut row = vec![
                        v.encoder.to_string(),
                        v.loss.to_string(),
                        if v.augmented { "aug" } else { "no-aug" }.to_string(),
                    ];
                    row.extend(members.iter().map(|c| {
                        report
                            .cell(*v, &c.name)
                            .map_or_else(|| "-".to_string(), value)
                    }));
                    row
                })
                .collect();
            let _ = writeln!(out, "\n{title}: {what}");
            out.push_str(&text_table(&header, 3, &rows));
        }
    }
    let _ = writeln!(out, "\nConditions");
    let rows: Vec<Vec<String>> = report
        .conditions
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.provenance.clone(),
                c.instances.to_string(),
                format!("{:.2}", c.mean_hypotheses),
            ]
        })
        .collect();
    let header = ["condition", "provenance", "instances", "mean |H|"].map(String::from);
    out.push_str(&text_table(&header, 2, &rows));
    out
}
