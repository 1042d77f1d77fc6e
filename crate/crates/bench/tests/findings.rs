use routelab_bench::report::{BaselineKey, ConditionSummary, ReportMetadata};
use routelab_bench::{
    check_findings, render_findings, EvaluationReport, GridConfig, PerturbationSpec, DRIFTED,
    OFFLINE, REMOVAL_RATIOS,
};
use routelab_ranker::{EncoderKind, VariantSpec};

fn conditions() -> Vec<ConditionSummary> {
    let plain = |name: &str| ConditionSummary {
        name: name.into(),
        perturbation: None,
        provenance: name.into(),
        instances: 5000,
        mean_hypotheses: 5.5,
    };
    let mut out = vec![plain(OFFLINE), plain(DRIFTED)];
    let specs = REMOVAL_RATIOS
        .iter()
        .map(|&r| PerturbationSpec::removal(r, 1).unwrap())
        .chain((0..=10).map(|k| PerturbationSpec::insertion(k, 1).unwrap()));
    for spec in specs {
        out.push(ConditionSummary {
            name: spec.perturbation.to_string(),
            perturbation: Some(spec),
            ..plain("x")
        });
    }
    out
}

/// Accuracy of `v` on condition `c` in a world where every finding holds.
fn healthy(v: VariantSpec, c: &ConditionSummary) -> f64 {
    let base = 0.85;
    match c.name.as_str() {
        OFFLINE => base,
        DRIFTED if v.augmented => base + 0.01,
        DRIFTED => base - 0.15,
        n if n.starts_with("removal-") => base + 0.1 * n[8..].parse::<f64>().unwrap(),
        n => {
            let k: f64 = n[10..].parse().unwrap();
            let per_k = match (v.augmented, v.encoder) {
                (true, _) => 0.001,
                (false, EncoderKind::Sequence) => 0.05,
                (false, _) => 0.04,
            };
            base - per_k * k
        }
    }
}

fn build(accuracy: impl Fn(VariantSpec, &ConditionSummary) -> f64) -> EvaluationReport {
    let conditions = conditions();
    let mut raw = Vec::new();
    for v in VariantSpec::grid() {
        for c in &conditions {
            let a = accuracy(v, c);
            raw.push((v, c.name.clone(), vec![a - 0.001, a, a + 0.001]));
        }
    }
    EvaluationReport::assemble(
        ReportMetadata {
            created_at: String::new(),
            tool_version: String::new(),
            seeds: vec![0, 1, 2],
            config: GridConfig::default(),
            train1: String::new(),
            train2: String::new(),
        },
        BaselineKey {
            variant: VariantSpec::grid()[0],
            condition: OFFLINE.into(),
        },
        conditions,
        raw,
        vec![],
    )
    .unwrap()
}

fn verdicts(r: &EvaluationReport) -> Vec<(&'static str, bool)> {
    check_findings(r)
        .unwrap()
        .iter()
        .map(|f| (f.id, f.passed))
        .collect()
}

#[test]
fn healthy_report_passes_every_finding() {
    let r = build(healthy);
    assert_eq!(
        verdicts(&r),
        vec![
            ("6a", true),
            ("6b", true),
            ("6c", true),
            ("6d", true),
            ("6e", true)
        ]
    );
    let text = render_findings(&check_findings(&r).unwrap());
    assert!(text.starts_with("PASS 6a"));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn each_violation_is_flagged() {
    // removal step down by 1.25 pp for one variant
    let r = build(|v, c| {
        let a = healthy(v, c);
        if v.key() == "attention-bce-aug" && c.name == "removal-0.5" {
            a - 0.025
        } else {
            a
        }
    });
    assert_eq!(verdicts(&r)[0], ("6a", false));

    // a no-aug variant that barely reacts to insertion
    let r = build(|v, c| {
        if v.key() == "aggregation-mce-noaug" && c.name == "insertion-10" {
            0.81
        } else {
            healthy(v, c)
        }
    });
    assert_eq!(verdicts(&r)[1], ("6b", false));

    // an aug variant losing 2.5 pp; also reverses the architecture order
    let r = build(|v, c| {
        let a = healthy(v, c);
        match (v.key().as_str(), c.name.as_str()) {
            ("sequence-mce-aug", "insertion-10") => 0.825,
            ("sequence-mce-noaug", "insertion-10") => 0.50,
            _ => a,
        }
    });
    let v = verdicts(&r);
    assert_eq!(v[2], ("6c", false));
    assert_eq!(v[3], ("6d", false));

    // drift: aug gains 2.5 pp, one no-aug variant unchanged
    let r = build(|v, c| {
        let a = healthy(v, c);
        match (v.key().as_str(), c.name.as_str()) {
            ("attention-mce-aug", DRIFTED) => 0.875,
            ("attention-bce-noaug", DRIFTED) => 0.85,
            _ => a,
        }
    });
    assert_eq!(verdicts(&r)[4], ("6e", false));
}

#[test]
fn missing_sweeps_are_an_error() {
    let mut r = build(healthy);
    r.conditions.retain(|c| c.name != "insertion-10");
    assert!(check_findings(&r).is_err());
}
