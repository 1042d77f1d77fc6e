mod commands;
mod config;
mod error;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use routelab_bench::{Format, PerturbationSpec};
use routelab_ranker::VariantSpec;

use crate::commands::{execute, REPORT_JSON, TEST1, TEST2, TRAIN1, TRAIN2};
use crate::config::{stage_seed, RunConfig, Stream, DEFAULT_OUT};
use crate::error::{fail, Classify, CliError, CliResult, Failure};
use crate::manifest::{sha256_file, Invocation, Manifest};

/// Skill-routing robustness lab: synthetic data, list-wise rankers and the
/// removal/insertion robustness benchmark.
#[derive(Debug, Parser)]
#[command(name = "routelab", version)]
struct Cli {
    /// JSON run config; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed, overriding the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory holding input datasets; defaults to the output directory.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Rendering of reports.
    #[arg(long, global = true, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Removal,
    Insertion,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the ontology, train1, test1 and the drifted test2.
    GenData,
    /// Write train2 by noise-injection augmentation of train1.
    Augment {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Noise hypotheses per interpretation group.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Train one variant, e.g. `attention-bce-aug`.
    Train {
        #[arg(long)]
        variant: String,
        /// Training set; defaults to train1 or train2 by augmentation.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Accuracy of a checkpoint on a test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Write a perturbed copy of a test set.
    Perturb {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Removal ratio in [0, 0.5].
        #[arg(long)]
        ratio: Option<f64>,
        /// Insertions per instance, 0 to 10.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train and evaluate all 12 variants; writes checkpoints and reports.
    Grid,
    /// Render a grid report.
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest and check that every
    /// deterministic output is reproduced byte for byte.
    Replay { manifest: PathBuf },
}

fn absolute(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir()
            .map(|d| d.join(path))
            .unwrap_or_else(|_| path.to_path_buf())
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).usage()?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(cli: &Cli, config: &RunConfig) -> PathBuf {
    absolute(
        cli.out
            .as_deref()
            .or(config.out.as_deref())
            .unwrap_or(Path::new(DEFAULT_OUT)),
    )
}

fn resolve(cli: &Cli, config: &mut RunConfig, out: &Path) -> CliResult<Invocation> {
    let data = cli
        .data
        .as_deref()
        .map(absolute)
        .unwrap_or_else(|| out.to_path_buf());
    let pick = |given: &Option<PathBuf>, default: &str| {
        given
            .as_deref()
            .map(absolute)
            .unwrap_or_else(|| data.join(default))
    };
    Ok(match &cli.command {
        Command::GenData => Invocation::GenData,
        Command::Augment { input, m } => {
            if let Some(m) = m {
                config.augment.m = *m;
            }
            Invocation::Augment {
                input: pick(input, TRAIN1),
            }
        }
        Command::Train { variant, input } => {
            let variant = VariantSpec::grid()
                .into_iter()
                .find(|v| v.key() == *variant);
            let Some(variant) = variant else {
                let keys: Vec<String> = VariantSpec::grid().iter().map(VariantSpec::key).collect();
                return fail(
                    Failure::Usage,
                    format!("unknown variant; expected one of: {}", keys.join(", ")),
                );
            };
            let default = if variant.augmented { TRAIN2 } else { TRAIN1 };
            Invocation::Train {
                variant,
                train: pick(input, default),
            }
        }
        Command::Eval { checkpoint, test } => Invocation::Eval {
            checkpoint: absolute(checkpoint),
            test: pick(test, TEST1),
        },
        Command::Perturb {
            input,
            kind,
            ratio,
            count,
        } => {
            let seed = stage_seed(config.seed, Stream::Perturb);
            let perturbation = match (kind, ratio, count) {
                (Kind::Removal, Some(r), None) => PerturbationSpec::removal(*r, seed),
                (Kind::Insertion, None, Some(k)) => PerturbationSpec::insertion(*k, seed),
                (Kind::Removal, _, _) => return fail(Failure::Usage, "removal takes --ratio only"),
                (Kind::Insertion, _, _) => {
                    return fail(Failure::Usage, "insertion takes --count only")
                }
            }
            .usage()?;
            Invocation::Perturb {
                input: pick(input, TEST1),
                perturbation,
            }
        }
        Command::Grid => Invocation::Grid {
            train1: data.join(TRAIN1),
            train2: data.join(TRAIN2),
            test1: data.join(TEST1),
            drifted: data.join(TEST2),
        },
        Command::Report { input } => Invocation::Report {
            input: input
                .as_deref()
                .map(absolute)
                .unwrap_or_else(|| out.join(REPORT_JSON)),
            format: cli.format,
        },
        Command::Replay { .. } => unreachable!("handled before resolution"),
    })
}

fn replay(cli: &Cli, path: &Path) -> CliResult<()> {
    if cli.config.is_some() || cli.seed.is_some() || cli.data.is_some() {
        return fail(
            Failure::Usage,
            "replay takes its config, seed and inputs from the manifest; only --out is allowed",
        );
    }
    let recorded = Manifest::read(path).data()?;
    for input in &recorded.inputs {
        let now = sha256_file(&input.path).data()?;
        if now != input.sha256 {
            return fail(
                Failure::Data,
                format!(
                    "input changed since the manifest was written: {}",
                    input.path.display()
                ),
            );
        }
    }
    let out = out_dir(cli, &recorded.config);
    let fresh = execute(&recorded.invocation, &recorded.config, &out)?;
    let mut checked = 0;
    let mut differing = Vec::new();
    for old in recorded.outputs.iter().filter(|o| o.deterministic) {
        checked += 1;
        match fresh.outputs.iter().find(|n| n.path == old.path) {
            Some(new) if new.sha256 == old.sha256 => {}
            _ => differing.push(old.path.display().to_string()),
        }
    }
    if !differing.is_empty() {
        return fail(
            Failure::Runtime,
            format!("replay differs in: {}", differing.join(", ")),
        );
    }
    eprintln!(
        "replay of {}: {checked} deterministic outputs reproduced byte-identically in {}",
        recorded.invocation.name(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Replay { manifest } = &cli.command {
        return replay(&cli, manifest);
    }
    let mut config = load_config(&cli)?;
    let out = out_dir(&cli, &config);
    let invocation = resolve(&cli, &mut config, &out)?;
    config.validate().usage()?;
    let manifest = execute(&invocation, &config, &out)?;
    eprintln!(
        "{}: {} outputs, manifest {}",
        invocation.name(),
        manifest.outputs.len(),
        manifest::manifest_path(&out, invocation.name()).display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Failure::Usage.exit_code()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { failure, error }) => {
            eprintln!("error: {error:#}");
            failure.exit_code()
        }
    }
}
