use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use routelab_core::io::read_dataset;

const SMALL: &str = r#"{"seed": 5, "data": {"train_instances": 300, "test_instances": 80},
 "train": {"epochs": 1}, "grid": {"seeds": [0]}}"#;

fn routelab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_routelab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    dir
}

fn gen(dir: &Path, out: &str) {
    let o = routelab(dir, &["--config", "small.json", "--out", out, "gen-data"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = setup();
    assert_eq!(code(&routelab(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&routelab(dir.path(), &["train"])), 1);
    assert_eq!(
        code(&routelab(
            dir.path(),
            &["train", "--variant", "lstm-bce-aug"]
        )),
        1
    );
    let o = routelab(
        dir.path(),
        &["perturb", "--kind", "removal", "--ratio", "0.75"],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert_eq!(code(&routelab(dir.path(), &["--help"])), 0);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = setup();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"data": {"train_instance": 5}}"#,
    )
    .unwrap();
    let o = routelab(dir.path(), &["--config", "bad.json", "gen-data"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("train_instance"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_two() {
    let dir = setup();
    let o = routelab(
        dir.path(),
        &["--out", "o", "eval", "--checkpoint", "nowhere"],
    );
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("checkpoint not found"),
        "{}",
        stderr(&o)
    );
    let o = routelab(dir.path(), &["--out", "o", "augment"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn gen_data_is_deterministic_and_seed_sensitive() {
    let dir = setup();
    gen(dir.path(), "a");
    gen(dir.path(), "b");
    for file in [
        "train1.jsonl",
        "test1.jsonl",
        "test2-drifted.jsonl",
        "ontology.json",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let o = routelab(
        dir.path(),
        &[
            "--config",
            "small.json",
            "--seed",
            "6",
            "--out",
            "c",
            "gen-data",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_ne!(
        fs::read(dir.path().join("a/train1.jsonl")).unwrap(),
        fs::read(dir.path().join("c/train1.jsonl")).unwrap()
    );
    let train = read_dataset(&dir.path().join("a/train1.jsonl")).unwrap();
    assert_eq!(train.len(), 300);
    assert_eq!(train.provenance, "train1");
}

#[test]
fn augment_cap_follows_m() {
    let dir = setup();
    gen(dir.path(), "o");
    let train1 = read_dataset(&dir.path().join("o/train1.jsonl")).unwrap();
    let o = routelab(
        dir.path(),
        &[
            "--config",
            "small.json",
            "--out",
            "o",
            "augment",
            "--m",
            "0",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let zero = read_dataset(&dir.path().join("o/train2.jsonl")).unwrap();
    assert_eq!(zero.instances, train1.instances);
    let o = routelab(
        dir.path(),
        &[
            "--config",
            "small.json",
            "--out",
            "o",
            "augment",
            "--m",
            "5",
        ],
    );
    assert_eq!(code(&o), 0);
    let five = read_dataset(&dir.path().join("o/train2.jsonl")).unwrap();
    for (before, after) in train1.instances.iter().zip(&five.instances) {
        let groups = before.groups().len();
        assert!(after.len() <= before.len() + 5 * groups);
        assert_eq!(&after.hypotheses[..before.len()], &before.hypotheses[..]);
    }
    assert!(five.stats().hypotheses > train1.stats().hypotheses);
}

#[test]
fn train_eval_and_perturb_write_expected_files() {
    let dir = setup();
    gen(dir.path(), "o");
    let args = ["--config", "small.json", "--out", "o"];
    let run = |extra: &[&str]| {
        let all: Vec<&str> = args.iter().chain(extra).copied().collect();
        let o = routelab(dir.path(), &all);
        assert_eq!(code(&o), 0, "{extra:?}: {}", stderr(&o));
        o
    };
    run(&["train", "--variant", "aggregation-mce-noaug"]);
    let ckpt = dir.path().join("o/checkpoints/aggregation-mce-noaug");
    assert!(ckpt.join("params.json").is_file() && ckpt.join("variant.json").is_file());
    let o = run(&[
        "eval",
        "--checkpoint",
        "o/checkpoints/aggregation-mce-noaug",
    ]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("accuracy"));
    run(&["perturb", "--kind", "insertion", "--count", "2"]);
    let test1 = read_dataset(&dir.path().join("o/test1.jsonl")).unwrap();
    let pert = read_dataset(&dir.path().join("o/test1-insertion-2.jsonl")).unwrap();
    assert_eq!(
        pert.stats().hypotheses,
        test1.stats().hypotheses + 2 * test1.len()
    );
    assert!(dir.path().join("o/manifest-perturb.json").is_file());
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = setup();
    gen(dir.path(), "o");
    let o = routelab(
        dir.path(),
        &["--config", "small.json", "--out", "o", "augment"],
    );
    assert_eq!(code(&o), 0);
    let o = routelab(
        dir.path(),
        &["--out", "r", "replay", "o/manifest-augment.json"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(dir.path().join("o/train2.jsonl")).unwrap(),
        fs::read(dir.path().join("r/train2.jsonl")).unwrap()
    );
    let o = routelab(
        dir.path(),
        &[
            "--seed",
            "1",
            "--out",
            "r",
            "replay",
            "o/manifest-augment.json",
        ],
    );
    assert_eq!(code(&o), 1);
    let mut bytes = fs::read(dir.path().join("o/train1.jsonl")).unwrap();
    bytes.push(b'\n');
    fs::write(dir.path().join("o/train1.jsonl"), bytes).unwrap();
    let o = routelab(
        dir.path(),
        &["--out", "r", "replay", "o/manifest-augment.json"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
