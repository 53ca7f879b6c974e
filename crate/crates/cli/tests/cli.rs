use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pon-sentinel"));
    c.env_remove("PON_SENTINEL_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_topology(dir: &Path) -> std::path::PathBuf {
    let topo = json!({
        "branches": [
            { "id": 1, "distance_m": 3.4, "reflect_height": 1.0 },
            { "id": 2, "distance_m": 5.2, "reflect_height": 1.0 },
            { "id": 3, "distance_m": 7.3, "reflect_height": 1.0 },
            { "id": 4, "distance_m": 9.6, "reflect_height": 1.0 }
        ],
        "split_index_offset_m": 10.0
    });
    let path = dir.join("topo.json");
    fs::write(&path, topo.to_string()).unwrap();
    path
}

/// Stderr is one `error kind=... message=...` line.
fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
    let rest = err.strip_prefix("error kind=").expect("machine-readable prefix");
    rest.split(' ').next().unwrap().to_string()
}

#[test]
fn simulate_is_deterministic_and_seed_env_is_fallback() {
    let dir = TempDir::new().unwrap();
    let topo = write_topology(dir.path());
    let a = dir.path().join("a.trace");
    let b = dir.path().join("b.trace");
    let c = dir.path().join("c.trace");
    let common = ["simulate", "--topology", p(&topo), "--faults", "3:0.2", "--psnr", "20"];
    ok(&[&common[..], &["--seed", "5", "--out", p(&a)]].concat());
    ok(&[&common[..], &["--seed", "5", "--out", p(&b)]].concat());
    let out = bin().args(common).args(["--out", p(&c)]).env("PON_SENTINEL_SEED", "5").output().unwrap();
    assert!(out.status.success());
    let ta = fs::read(&a).unwrap();
    assert_eq!(ta, fs::read(&b).unwrap());
    assert_eq!(ta, fs::read(&c).unwrap());

    let d = dir.path().join("d.trace");
    ok(&[&common[..], &["--seed", "6", "--out", p(&d)]].concat());
    assert_ne!(ta, fs::read(&d).unwrap());
}

#[test]
fn pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let topo = write_topology(root);
    let data = root.join("data");
    let data2 = root.join("data2");
    for d in [&data, &data2] {
        ok(&["gendata", "--seed", "3", "--per-class", "10", "--pool", "8", "--out", p(d)]);
    }
    for f in ["train.tsv", "val.tsv", "test.tsv"] {
        assert_eq!(fs::read(data.join(f)).unwrap(), fs::read(data2.join(f)).unwrap(), "{f}");
    }

    let ckpt = root.join("model.json");
    let ckpt2 = root.join("model2.json");
    let hist = root.join("history.csv");
    let train = ["train", "--seed", "1", "--dataset", p(&data), "--hidden", "4", "--neurons", "4", "--epochs", "2"];
    ok(&[&train[..], &["--out", p(&ckpt), "--history", p(&hist)]].concat());
    ok(&[&train[..], &["--out", p(&ckpt2)]].concat());
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(&ckpt2).unwrap());
    let history = fs::read_to_string(&hist).unwrap();
    assert!(history.starts_with("# pon-sentinel train {"));
    assert_eq!(history.lines().nth(1), Some("epoch,train_loss,val_loss,val_acc"));
    assert_eq!(history.lines().count(), 4);

    let confusion = root.join("confusion.csv");
    let stdout = ok(&["eval", "--checkpoint", p(&ckpt), "--dataset", p(&data), "--out", p(&confusion)]);
    assert!(stdout.starts_with("accuracy "));
    let csv = fs::read_to_string(&confusion).unwrap();
    assert!(csv.starts_with("# pon-sentinel eval"));
    assert_eq!(csv.lines().nth(1), Some("true,C0,C1,C2,C3,C4,C5,C6"));

    let healthy = root.join("healthy.trace");
    let faulty = root.join("faulty.trace");
    let reference = root.join("reference.json");
    ok(&["simulate", "--topology", p(&topo), "--psnr", "30", "--out", p(&healthy)]);
    ok(&["simulate", "--topology", p(&topo), "--faults", "4:0.04", "--psnr", "30", "--out", p(&faulty)]);
    ok(&["register", "--trace", p(&healthy), "--topology", p(&topo), "--out", p(&reference)]);
    let report = root.join("report.json");
    let table = ok(&[
        "diagnose",
        "--trace",
        p(&faulty),
        "--reference",
        p(&reference),
        "--checkpoint",
        p(&ckpt),
        "--out",
        p(&report),
    ]);
    assert!(table.contains("faulty branches:"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(report["checkpoint_id"].is_string());
    assert!(report["timestamp"].is_null());

    let sweep = root.join("sweep.csv");
    ok(&[
        "sweep", "--dataset", p(&data), "--layers", "1", "--neurons", "16,0", "--hidden", "4", "--epochs", "1",
        "--out", p(&sweep),
    ]);
    let rows = fs::read_to_string(&sweep).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert!(lines[0].starts_with("# pon-sentinel sweep"));
    assert_eq!(lines[1], "layers,neurons,accuracy,train_seconds,best_epoch,status");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,16,") && lines[2].ends_with(",ok"));
    assert!(lines[3].starts_with("1,0,,,,\"failed: invalid_config"));

    let bench = root.join("bench.csv");
    ok(&["bench", "--checkpoint", p(&ckpt), "--dataset", p(&data), "--reps", "3", "--epochs", "1", "--out", p(&bench)]);
    let timing = fs::read_to_string(&bench).unwrap();
    assert_eq!(timing.lines().nth(1), Some("model,phase,input_size,seconds"));
    let models: Vec<&str> = timing.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["gnb", "ann", "lstm"]);
}

/// One window per class with a single unit sample at the class index, and a
/// linear model that reads that sample back.
#[test]
fn eval_of_perfect_predictor_is_one() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("#pon-dataset v1 seed=0 windows=14 config=-\n");
    for k in 0..14 {
        let class = k % 7;
        let values: Vec<String> = (0..60).map(|i| if i == class { "1" } else { "0" }.to_string()).collect();
        text.push_str(&format!("{}\tC{class}\t-\t0\t-\n", values.join(",")));
    }
    let data = dir.path().join("perfect.tsv");
    fs::write(&data, text).unwrap();

    let mut w = vec![0.0; 7 * 60];
    for k in 0..7 {
        w[k * 60 + k] = 10.0;
    }
    let ckpt = json!({
        "format": "pon-sentinel/checkpoint",
        "version": 1,
        "seed": 0,
        "train_config": {
            "learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8,
            "batch_size": 64, "max_epochs": 1, "patience": 0, "clip_norm": null, "seed": 0
        },
        "model": {
            "kind": "mlp",
            "layers": [{
                "w": { "v": 1, "dim": [7, 60], "data": w },
                "b": { "v": 1, "dim": [7], "data": vec![0.0; 7] },
                "activation": "linear"
            }]
        }
    });
    let path = dir.path().join("perfect.json");
    fs::write(&path, ckpt.to_string()).unwrap();
    assert_eq!(ok(&["eval", "--checkpoint", p(&path), "--dataset", p(&data)]).trim(), "accuracy 1");
}

#[test]
fn failures_are_one_line_with_nonzero_exit() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    let out = run(&["simulate", "--topology", p(&missing), "--out", p(&dir.path().join("t"))]);
    assert_eq!(error_kind(&out), "io");

    let topo = write_topology(dir.path());
    let out = run(&["simulate", "--topology", p(&topo), "--faults", "9:0.5", "--out", p(&dir.path().join("t"))]);
    assert_eq!(error_kind(&out), "invalid_argument");

    let out = run(&["simulate", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");

    let out = run(&["train", "--dataset", p(dir.path()), "--window-len", "30", "--out", p(&dir.path().join("m"))]);
    assert!(!out.status.success());
}
