//! Subcommand bodies. Each records its inputs and outputs so the caller
//! can write a manifest.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use routelab_bench::report::{render_csv, text_table};
use routelab_bench::{
    accuracy, check_findings, render_findings, render_report, run_grid_with, standard_conditions,
    train_ranker, EvaluationReport, Format, GridConfig, PerturbationSpec,
};
use routelab_core::augment::{augment_dataset, AugmentConfig};
use routelab_core::io::{header_path, read_dataset, write_atomic, write_dataset, write_ontology};
use routelab_core::rng::derive_seed;
use routelab_core::world::{
    calibrate_new_subscription_prob, drift_ontology, generate_ontology, regenerate_under_drift,
    sample_dataset, DriftConfig,
};
use routelab_core::Dataset;
use routelab_ranker::{checkpoint, train, TrainConfig, VariantSpec};
use serde::Serialize;

use crate::config::{stage_seed, RunConfig, Stream};
use crate::error::{fail, Classify, CliResult, Failure};
use crate::manifest::{sha256_file, InputDigest, Invocation, Manifest, OutputDigest};

pub const TRAIN1: &str = "train1.jsonl";
pub const TRAIN2: &str = "train2.jsonl";
pub const TEST1: &str = "test1.jsonl";
pub const TEST2: &str = "test2-drifted.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

struct Run<'a> {
    config: &'a RunConfig,
    out: &'a Path,
    inputs: Vec<PathBuf>,
    outputs: Vec<(PathBuf, bool)>,
    seeds: BTreeMap<String, u64>,
}

impl Run<'_> {
    fn seed(&mut self, name: &str, value: u64) -> u64 {
        self.seeds.insert(name.into(), value);
        value
    }

    fn load(&mut self, path: &Path) -> CliResult<Dataset> {
        let data = read_dataset(path)
            .with_context(|| format!("cannot load dataset {}", path.display()))
            .data()?;
        self.inputs.push(path.to_path_buf());
        self.inputs.push(header_path(path));
        Ok(data)
    }

    fn save_dataset(&mut self, data: &Dataset, name: &str) -> CliResult<()> {
        let path = self.out.join(name);
        write_dataset(data, &path).runtime()?;
        self.outputs.push((name.into(), true));
        let header = header_path(Path::new(name));
        self.outputs.push((header, true));
        Ok(())
    }

    fn save_bytes(&mut self, name: &str, bytes: &[u8], deterministic: bool) -> CliResult<()> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("cannot create {}", parent.display()))
                .runtime()?;
        }
        write_atomic(&path, bytes).runtime()?;
        self.outputs.push((name.into(), deterministic));
        Ok(())
    }

    fn save_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).runtime()?;
        text.push('\n');
        self.save_bytes(name, text.as_bytes(), true)
    }

    fn save_checkpoint(&mut self, model: &routelab_ranker::Ranker, dir: &str) -> CliResult<()> {
        checkpoint::save(model, &self.out.join(dir)).runtime()?;
        for file in [checkpoint::PARAMS_FILE, checkpoint::DESCRIPTOR_FILE] {
            self.outputs.push((Path::new(dir).join(file), true));
        }
        Ok(())
    }
}

/// Runs `invocation` into `out` and writes its manifest there.
pub fn execute(invocation: &Invocation, config: &RunConfig, out: &Path) -> CliResult<Manifest> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
        .runtime()?;
    let mut run = Run {
        config,
        out,
        inputs: Vec::new(),
        outputs: Vec::new(),
        seeds: BTreeMap::new(),
    };
    match invocation {
        Invocation::GenData => gen_data(&mut run)?,
        Invocation::Augment { input } => augment(&mut run, input)?,
        Invocation::Train { variant, train } => train_one(&mut run, *variant, train)?,
        Invocation::Eval { checkpoint, test } => eval(&mut run, checkpoint, test)?,
        Invocation::Perturb {
            input,
            perturbation,
        } => perturb(&mut run, input, perturbation)?,
        Invocation::Grid {
            train1,
            train2,
            test1,
            drifted,
        } => grid(&mut run, train1, train2, test1, drifted)?,
        Invocation::Report { input, format } => report(&mut run, input, *format)?,
    }
    let inputs = run
        .inputs
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .data()?;
    let outputs = run
        .outputs
        .iter()
        .map(|(p, deterministic)| {
            Ok(OutputDigest {
                path: p.clone(),
                sha256: sha256_file(&out.join(p))?,
                deterministic: *deterministic,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .runtime()?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        created_at: chrono::Utc::now().to_rfc3339(),
        invocation: invocation.clone(),
        config: RunConfig {
            out: None,
            ..config.clone()
        },
        seeds: run.seeds,
        inputs,
        outputs,
    };
    manifest.write(out).runtime()?;
    Ok(manifest)
}

fn stats_table(rows: &[(&str, &Dataset)]) -> String {
    let header = [
        "dataset",
        "provenance",
        "instances",
        "hypotheses",
        "mean |H|",
        "mean interpretations",
    ]
    .map(String::from);
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, d)| {
            let s = d.stats();
            vec![
                name.to_string(),
                d.provenance.clone(),
                s.instances.to_string(),
                s.hypotheses.to_string(),
                format!("{:.2}", s.mean_hypotheses),
                format!("{:.2}", s.mean_interpretations),
            ]
        })
        .collect();
    text_table(&header, 2, &rows)
}

#[derive(Serialize)]
struct DriftRecord {
    p_unsubscribe: f64,
    p_new_subscription: f64,
    calibrated: bool,
    target_insertions: f64,
    seed: u64,
    dropped_instances: usize,
    mean_inserted: f64,
    mean_removed: f64,
}

/// Mean hypotheses per surviving instance that were added and removed by
/// drift, matched by (interpretation, skill).
fn drift_edits(offline: &Dataset, online: &Dataset) -> (f64, f64) {
    let by_id: HashMap<&str, _> = offline
        .instances
        .iter()
        .map(|i| (i.id.as_str(), i))
        .collect();
    let (mut added, mut removed) = (0usize, 0usize);
    for on in &online.instances {
        let off = by_id[on.id.as_str()];
        let key = |h: &routelab_core::Hypothesis| (h.interpretation.clone(), h.skill.clone());
        let a: HashSet<_> = off.hypotheses.iter().map(key).collect();
        let b: HashSet<_> = on.hypotheses.iter().map(key).collect();
        added += b.difference(&a).count();
        removed += a.difference(&b).count();
    }
    let n = online.len().max(1) as f64;
    (added as f64 / n, removed as f64 / n)
}

fn gen_data(run: &mut Run<'_>) -> CliResult<()> {
    let cfg = run.config;
    let ontology_seed = run.seed("ontology", stage_seed(cfg.seed, Stream::Ontology));
    let ontology = generate_ontology(&cfg.world, ontology_seed).usage()?;
    let train_seed = run.seed("train1", stage_seed(cfg.seed, Stream::Train1));
    let mut train1 =
        sample_dataset(&ontology, &cfg.world, cfg.data.train_instances, train_seed).runtime()?;
    train1.provenance = "train1".into();
    let test_seed = run.seed("test1", stage_seed(cfg.seed, Stream::Test1));
    let mut test1 =
        sample_dataset(&ontology, &cfg.world, cfg.data.test_instances, test_seed).runtime()?;
    test1.provenance = "test1".into();

    let (p_new, calibrated) = match cfg.drift.p_new_subscription {
        Some(p) => (p, false),
        None => (
            calibrate_new_subscription_prob(&ontology, &test1, cfg.drift.target_insertions),
            true,
        ),
    };
    let drift = DriftConfig {
        p_unsubscribe: cfg.drift.p_unsubscribe,
        p_new_subscription: p_new,
        seed: run.seed("drift", stage_seed(cfg.seed, Stream::Drift)),
    };
    let drifted = drift_ontology(&ontology, &drift).usage()?;
    let online = regenerate_under_drift(&test1, &drifted).runtime()?;
    if online.dataset.is_empty() {
        return fail(Failure::Data, "drift removed every test instance");
    }
    let (mean_inserted, mean_removed) = drift_edits(&test1, &online.dataset);

    for (name, o) in [
        ("ontology.json", &ontology),
        ("ontology-drifted.json", &drifted),
    ] {
        write_ontology(o, &run.out.join(name)).runtime()?;
        run.outputs.push((name.into(), true));
    }
    run.save_dataset(&train1, TRAIN1)?;
    run.save_dataset(&test1, TEST1)?;
    run.save_dataset(&online.dataset, TEST2)?;
    run.save_json(
        "drift.json",
        &DriftRecord {
            p_unsubscribe: drift.p_unsubscribe,
            p_new_subscription: p_new,
            calibrated,
            target_insertions: cfg.drift.target_insertions,
            seed: drift.seed,
            dropped_instances: online.dropped,
            mean_inserted,
            mean_removed,
        },
    )?;

    print!(
        "{}",
        stats_table(&[
            ("train1", &train1),
            ("test1", &test1),
            ("test2-drifted", &online.dataset)
        ])
    );
    println!(
        "ontology: {} intents, {} skills, {} subscriptions ({} after drift)",
        ontology.intents().count(),
        ontology.skill_space().len(),
        ontology.edge_count(),
        drifted.edge_count()
    );
    println!(
        "drift: p_unsubscribe {:.3}, p_new_subscription {:.5}{}, {:.2} inserted and {:.2} removed hypotheses per instance, {} instances dropped",
        drift.p_unsubscribe,
        p_new,
        if calibrated { " (calibrated)" } else { "" },
        mean_inserted,
        mean_removed,
        online.dropped
    );
    Ok(())
}

fn augment(run: &mut Run<'_>, input: &Path) -> CliResult<()> {
    let train1 = run.load(input)?;
    let cfg = AugmentConfig {
        seed: run.seed(
            "augment",
            derive_seed(
                stage_seed(run.config.seed, Stream::Augment),
                run.config.augment.seed,
            ),
        ),
        ..run.config.augment
    };
    let mut train2 = augment_dataset(&train1, &cfg).data()?;
    train2.provenance = format!("train2-augmented(m={})", cfg.m);
    run.save_dataset(&train2, TRAIN2)?;
    print!(
        "{}",
        stats_table(&[("input", &train1), ("train2", &train2)])
    );
    Ok(())
}

/// Shared training config with the token table sized to the world
/// vocabulary, so test utterances never fall outside it.
fn train_config(config: &RunConfig) -> TrainConfig {
    let mut tc = config.train.clone();
    if tc.token_vocab.is_none() {
        tc.token_vocab = Some(config.world.utterance_vocab);
    }
    tc
}

fn train_one(run: &mut Run<'_>, variant: VariantSpec, path: &Path) -> CliResult<()> {
    let data = run.load(path)?;
    let mut tc = train_config(run.config);
    tc.seed = run.seed(
        "train",
        derive_seed(
            stage_seed(run.config.seed, Stream::Train),
            run.config.train.seed,
        ),
    );
    let start = Instant::now();
    let out = train(variant, &data, &tc)
        .with_context(|| format!("training {variant} failed"))
        .runtime()?;
    run.save_checkpoint(&out.model, &format!("checkpoints/{}", variant.key()))?;
    for (epoch, loss) in out.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    }
    println!(
        "trained {variant} on {} instances in {:.1}s -> {}",
        data.len(),
        start.elapsed().as_secs_f64(),
        run.out.join("checkpoints").join(variant.key()).display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalRecord {
    variant: VariantSpec,
    checkpoint: PathBuf,
    test: PathBuf,
    test_provenance: String,
    instances: usize,
    accuracy: f64,
}

fn eval(run: &mut Run<'_>, dir: &Path, test: &Path) -> CliResult<()> {
    let model = checkpoint::load(dir).data()?;
    for file in [checkpoint::PARAMS_FILE, checkpoint::DESCRIPTOR_FILE] {
        run.inputs.push(dir.join(file));
    }
    let data = run.load(test)?;
    let acc = accuracy(&model, &data).data()?;
    let record = EvalRecord {
        variant: model.spec(),
        checkpoint: dir.to_path_buf(),
        test: test.to_path_buf(),
        test_provenance: data.provenance.clone(),
        instances: data.len(),
        accuracy: acc,
    };
    run.save_json("eval.json", &record)?;
    println!(
        "{}: accuracy {:.4} ({:.2}%) on {} instances of {}",
        record.variant,
        acc,
        100.0 * acc,
        data.len(),
        data.provenance
    );
    Ok(())
}

fn perturb(run: &mut Run<'_>, input: &Path, spec: &PerturbationSpec) -> CliResult<()> {
    let data = run.load(input)?;
    run.seed("perturb", spec.seed);
    let out = spec.apply(&data).data()?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let name = format!("{stem}-{}.jsonl", spec.perturbation);
    run.save_dataset(&out, &name)?;
    print!("{}", stats_table(&[("input", &data), (&name, &out)]));
    Ok(())
}

fn grid(
    run: &mut Run<'_>,
    train1: &Path,
    train2: &Path,
    test1: &Path,
    drifted: &Path,
) -> CliResult<()> {
    let t1 = run.load(train1)?;
    let t2 = run.load(train2)?;
    let offline = run.load(test1)?;
    let online = run.load(drifted)?;
    let cfg = run.config;
    let conditions_seed = run.seed("conditions", stage_seed(cfg.seed, Stream::Conditions));
    let tests = standard_conditions(&offline, Some(&online), conditions_seed).data()?;
    let grid_base = stage_seed(cfg.seed, Stream::Grid);
    let seeds: Vec<u64> = cfg
        .grid
        .seeds
        .iter()
        .map(|&s| derive_seed(grid_base, s))
        .collect();
    for (r, s) in seeds.iter().enumerate() {
        run.seed(&format!("grid.replicate{r}"), *s);
    }
    let grid_config = GridConfig {
        train: train_config(cfg),
        seeds,
        baseline_condition: cfg.grid.baseline_condition.clone(),
    };

    let total = 12 * grid_config.seeds.len();
    let start = Instant::now();
    let mut done = 0;
    let out = run.out;
    let mut checkpoints = Vec::new();
    let report = run_grid_with(&t1, &t2, &tests, &grid_config, |job| {
        let t = Instant::now();
        let trained = train_ranker(job)?;
        done += 1;
        eprintln!(
            "[{done:>2}/{total}] {:<22} replicate {} loss {:.4} in {:>6.1}s (elapsed {:.0}s)",
            job.variant.key(),
            job.replicate,
            trained.epoch_losses.last().copied().unwrap_or(f64::NAN),
            t.elapsed().as_secs_f64(),
            start.elapsed().as_secs_f64()
        );
        let dir = format!(
            "checkpoints/{}/replicate-{}",
            job.variant.key(),
            job.replicate
        );
        checkpoint::save(&trained.router, &out.join(&dir))?;
        checkpoints.push(dir);
        Ok(trained)
    })
    .runtime()?;
    for dir in checkpoints {
        for file in [checkpoint::PARAMS_FILE, checkpoint::DESCRIPTOR_FILE] {
            run.outputs.push((Path::new(&dir).join(file), true));
        }
    }

    let json = report.to_json().runtime()?;
    run.save_bytes(REPORT_JSON, json.as_bytes(), false)?;
    run.save_bytes(REPORT_CSV, render_csv(&report).as_bytes(), true)?;
    let text = text_with_findings(&report);
    run.save_bytes("report.txt", text.as_bytes(), true)?;
    print!("{text}");
    Ok(())
}

fn text_with_findings(report: &EvaluationReport) -> String {
    let mut text = render_report(report, Format::Text).expect("text rendering cannot fail");
    if let Ok(findings) = check_findings(report) {
        let _ = write!(text, "\nFindings\n{}", render_findings(&findings));
    }
    text
}

fn report(run: &mut Run<'_>, input: &Path, format: Format) -> CliResult<()> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("cannot read report {}", input.display()))
        .data()?;
    run.inputs.push(input.to_path_buf());
    let report = EvaluationReport::from_json(&text)
        .with_context(|| format!("invalid report {}", input.display()))
        .data()?;
    let rendered = match format {
        Format::Text => text_with_findings(&report),
        other => render_report(&report, other).runtime()?,
    };
    let name = format!(
        "report-view.{}",
        if format == Format::Text {
            "txt"
        } else {
            format.as_str()
        }
    );
    run.save_bytes(&name, rendered.as_bytes(), true)?;
    print!("{rendered}");
    Ok(())
}
