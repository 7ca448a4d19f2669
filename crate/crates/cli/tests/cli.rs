use std::path::Path;
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 8] = [
    "extract",
    "sample",
    "train",
    "embed",
    "eval-knn",
    "trajectory",
    "confusion",
    "synth",
];

const SMALL: &str = r#"
seed = 4

[train]
max_epochs = 2
batch_size = 64
val_files = ["synth_1005"]

[synth]
n_files = 6
file_duration_s = 60.0
train_n_files = 6
train_file_duration_s = 40.0
train_file_offset = 1000
val_n_files = 1
"#;

fn behman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_behman"))
        .args(args)
        .output()
        .expect("spawn behman")
}

fn ok(args: &[&str]) -> Output {
    let out = behman(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth -> sample -> train -> eval-knn in `dir` with `jobs` workers.
fn pipeline(dir: &Path, jobs: &str) {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let base = ["--config", s(&cfg), "--jobs", jobs];
    let data = dir.join("data");
    ok(&[&base[..], &["synth", "--out", s(&data)]].concat());
    let tuples = dir.join("tuples.tsv");
    ok(&[&base[..], &["sample", "--features", s(&data.join("train")), "--out", s(&tuples)]].concat());
    let model = dir.join("model.bmc");
    ok(&[
        &base[..],
        &["train", "--tuples", s(&tuples), "--features", s(&data.join("train")), "--out", s(&model)],
    ]
    .concat());
    let eval = data.join("eval");
    ok(&[
        &base[..],
        &[
            "eval-knn",
            "--features",
            s(&eval),
            "--labels",
            s(&eval.join("labels.csv")),
            "--checkpoint",
            s(&model),
            "--out",
            s(&dir.join("eval")),
        ],
    ]
    .concat());
}

#[test]
fn every_subcommand_has_help() {
    ok(&["--help"]);
    for c in SUBCOMMANDS {
        let out = ok(&[c, "--help"]);
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(behman(&["sample", "--bogus"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nbatch_size = 0\n").unwrap();
    let out = behman(&["--config", s(&cfg), "synth", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let out = behman(&["--config", s(&cfg), "synth", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_magic_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.bmf"), b"NOPE\x01\x00\x00\x00").unwrap();
    let out = behman(&[
        "sample",
        "--features",
        s(dir.path()),
        "--out",
        s(&dir.path().join("t.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid feature file"), "{err}");
    assert!(err.contains("\"error\":\"invalid_feature_file\""), "{err}");
}

#[test]
fn missing_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = behman(&[
        "embed",
        "--checkpoint",
        s(&dir.path().join("none.bmc")),
        "--features",
        s(dir.path()),
        "--out",
        s(&dir.path().join("e")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing_input"));
}

#[test]
fn end_to_end_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d, "1");
    let eval = d.join("data/eval");
    for f in ["eval/predictions.csv", "eval/accuracy.json", "eval/run_manifest.json", "model.bmc.manifest.json"] {
        assert!(d.join(f).is_file(), "missing {f}");
    }
    let acc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("eval/accuracy.json")).unwrap()).unwrap();
    let a = acc["mean_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&a));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("eval/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "eval-knn");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    let emb = d.join("emb");
    ok(&["embed", "--checkpoint", s(&d.join("model.bmc")), "--features", s(&eval), "--out", s(&emb)]);
    assert_eq!(
        std::fs::read_dir(&emb).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "bmf")).count(),
        6
    );

    let traj = d.join("traj");
    ok(&[
        "trajectory",
        "--features",
        s(&eval),
        "--labels",
        s(&eval.join("labels.csv")),
        "--session",
        "synth_0000",
        "--n",
        "10",
        "--out",
        s(&traj),
    ]);
    let csv = std::fs::read_to_string(traj.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(std::fs::read_to_string(traj.join("trajectory.svg")).unwrap().starts_with("<svg"));

    let conf = d.join("confusion.csv");
    ok(&["confusion", "--features", s(&eval), "--files", "synth_0000,synth_0001,synth_0002", "--out", s(&conf)]);
    assert_eq!(std::fs::read_to_string(&conf).unwrap().lines().count(), 4);
}

#[test]
fn pipeline_is_identical_across_jobs() {
    let one = tempfile::tempdir().unwrap();
    let three = tempfile::tempdir().unwrap();
    pipeline(one.path(), "1");
    pipeline(three.path(), "3");
    for f in ["tuples.tsv", "model.bmc", "eval/predictions.csv", "eval/accuracy.json"] {
        assert_eq!(
            std::fs::read(one.path().join(f)).unwrap(),
            std::fs::read(three.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn synth_and_extract_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        "[synth]\nn_files = 2\nfile_duration_s = 25.0\ntrain_n_files = 0\n",
    )
    .unwrap();
    let out = dir.path().join("s");
    let run = || {
        ok(&["--config", s(&cfg), "synth", "--out", s(&out), "--audio"]);
        ok(&["extract", "--in", s(&out.join("audio")), "--out", s(&out.join("extracted"))]);
        ["eval/synth_0000.bmf", "eval/labels.csv", "audio/synth_0001.wav", "extracted/synth_0001.bmf"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    // 25 s at a 20 s window and 1 s shift
    let bytes = &first[3];
    assert!(bytes.starts_with(b"BMF1"));
}
