//! Directional robustness findings checked against a grid report.

use std::fmt::Write;

use routelab_ranker::{EncoderKind, LossKind, VariantSpec};

use crate::error::BenchError;
use crate::grid::DRIFTED;
use crate::perturb::Perturbation;
use crate::report::{median, Cell, EvaluationReport};

/// Largest accuracy decrease allowed between consecutive removal ratios.
pub const REMOVAL_STEP_TOLERANCE_PP: f64 = 1.0;
/// Smallest accuracy loss from 0 to 10 insertions for no-aug variants.
pub const INSERTION_MIN_DROP_PP: f64 = 5.0;
/// Largest offline-to-perturbed gap allowed for augmented variants.
pub const AUGMENTED_TOLERANCE_PP: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

fn pp(a: f64) -> f64 {
    100.0 * a
}

struct Sweeps<'r> {
    report: &'r EvaluationReport,
    removal: Vec<(f64, String)>,
    insert0: String,
    insert10: String,
}

impl<'r> Sweeps<'r> {
    fn new(report: &'r EvaluationReport) -> Result<Self, BenchError> {
        let mut removal = Vec::new();
        let (mut insert0, mut insert10) = (None, None);
        for c in &report.conditions {
            match c.perturbation.map(|s| s.perturbation) {
                Some(Perturbation::Removal { ratio }) => removal.push((ratio, c.name.clone())),
                Some(Perturbation::Insertion { count: 0 }) => insert0 = Some(c.name.clone()),
                Some(Perturbation::Insertion { count: 10 }) => insert10 = Some(c.name.clone()),
                _ => {}
            }
        }
        removal.sort_by(|a, b| a.0.total_cmp(&b.0));
        if removal.len() < 2 {
            return Err(BenchError::UnknownCondition("removal sweep".into()));
        }
        Ok(Self {
            report,
            removal,
            insert0: insert0.ok_or_else(|| BenchError::UnknownCondition("insertion-0".into()))?,
            insert10: insert10
                .ok_or_else(|| BenchError::UnknownCondition("insertion-10".into()))?,
        })
    }

    fn cell(&self, v: VariantSpec, condition: &str) -> Result<&'r Cell, BenchError> {
        self.report
            .cell(v, condition)
            .ok_or_else(|| BenchError::UnknownCondition(format!("{condition} for {v}")))
    }

    /// Median over seeds of the per-seed accuracy loss from 0 to 10 insertions.
    fn median_drop(&self, v: VariantSpec) -> Result<f64, BenchError> {
        let (a, b) = (self.cell(v, &self.insert0)?, self.cell(v, &self.insert10)?);
        let drops: Vec<f64> = a
            .seed_accuracies
            .iter()
            .zip(&b.seed_accuracies)
            .map(|(x, y)| pp(x - y))
            .collect();
        Ok(median(&drops).unwrap_or(f64::NAN))
    }
}

fn finding(id: &'static str, title: &'static str, details: Vec<(bool, String)>) -> Finding {
    Finding {
        id,
        title,
        passed: details.iter().all(|(ok, _)| *ok),
        details: details
            .into_iter()
            .map(|(ok, d)| format!("{} {d}", if ok { "ok  " } else { "FAIL" }))
            .collect(),
    }
}

/// Checks the removal, insertion, architecture and drift findings. Needs
/// the baseline condition, `drifted`, a removal sweep and insertion
/// counts 0 and 10.
pub fn check_findings(report: &EvaluationReport) -> Result<Vec<Finding>, BenchError> {
    let s = Sweeps::new(report)?;
    let offline = report.baseline.condition.as_str();
    let variants = report.variants();
    let mut out = Vec::new();

    let mut rows = Vec::new();
    for &v in &variants {
        let accs = s
            .removal
            .iter()
            .map(|(_, name)| s.cell(v, name).map(|c| c.accuracy))
            .collect::<Result<Vec<_>, _>>()?;
        let worst = accs
            .windows(2)
            .map(|w| pp(w[1] - w[0]))
            .fold(f64::INFINITY, f64::min);
        let sweep: Vec<String> = accs.iter().map(|a| format!("{:.2}", pp(*a))).collect();
        rows.push((
            worst >= -REMOVAL_STEP_TOLERANCE_PP,
            format!("{v}: {} (worst step {worst:+.2} pp)", sweep.join(" -> ")),
        ));
    }
    out.push(finding(
        "6a",
        "removal sweep: accuracy non-decreasing in removal ratio within 1 pp per step",
        rows,
    ));

    let mut no_aug = Vec::new();
    let mut aug = Vec::new();
    for &v in &variants {
        let (a, b) = (s.cell(v, &s.insert0)?, s.cell(v, &s.insert10)?);
        let drop = pp(a.accuracy - b.accuracy);
        let line = format!(
            "{v}: k=0 {:.2}%, k=10 {:.2}%, drop {drop:+.2} pp",
            pp(a.accuracy),
            pp(b.accuracy)
        );
        if v.augmented {
            aug.push((drop.abs() <= AUGMENTED_TOLERANCE_PP, line));
        } else {
            no_aug.push((drop >= INSERTION_MIN_DROP_PP, line));
        }
    }
    out.push(finding(
        "6b",
        "insertion without augmentation: every no-aug variant loses >= 5 pp from k=0 to k=10",
        no_aug,
    ));
    out.push(finding(
        "6c",
        "insertion with augmentation: every aug variant stays within 2 pp of its k=0 accuracy",
        aug,
    ));

    let mut rows = Vec::new();
    for loss in LossKind::ALL {
        let spec = |encoder| VariantSpec {
            encoder,
            loss,
            augmented: false,
        };
        let (seq, att) = (spec(EncoderKind::Sequence), spec(EncoderKind::Attention));
        if !variants.contains(&seq) || !variants.contains(&att) {
            continue;
        }
        let (ds, da) = (s.median_drop(seq)?, s.median_drop(att)?);
        rows.push((
            ds >= da,
            format!("{loss}: sequence median drop {ds:+.2} pp vs attention {da:+.2} pp"),
        ));
    }
    out.push(finding(
        "6d",
        "architecture ordering: sequence no-aug drops at least as much as attention no-aug at k=10",
        rows,
    ));

    let mut rows = Vec::new();
    for &v in &variants {
        let (off, on) = (s.cell(v, offline)?, s.cell(v, DRIFTED)?);
        let diff = pp(on.accuracy - off.accuracy);
        let ok = if v.augmented {
            diff.abs() <= AUGMENTED_TOLERANCE_PP
        } else {
            on.accuracy < off.accuracy
        };
        rows.push((
            ok,
            format!(
                "{v}: offline {:.2}%, drifted {:.2}%, change {diff:+.2} pp",
                pp(off.accuracy),
                pp(on.accuracy)
            ),
        ));
    }
    out.push(finding(
        "6e",
        "drifted test: no-aug variants lose accuracy, aug variants stay within 2 pp",
        rows,
    ));
    Ok(out)
}

pub fn render_findings(findings: &[Finding]) -> String {
    let mut out = String::new();
    for f in findings {
        let _ = writeln!(
            out,
            "{} {}: {}",
            if f.passed { "PASS" } else { "FAIL" },
            f.id,
            f.title
        );
        for d in &f.details {
            let _ = writeln!(out, "    {d}");
        }
    }
    out
}
