use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn brepnet(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brepnet"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = brepnet(cwd, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn last_stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("stderr line")).unwrap()
}

fn corpus(dir: &Path, count: &str) {
    ok(dir, &["synth", "--out", "data", "--count", count, "--seed", "3"]);
}

fn train_losses(log: &Path) -> Vec<f64> {
    read_json(log).as_array().unwrap().iter().map(|e| e["train_loss"].as_f64().unwrap()).collect()
}

#[test]
fn training_loss_falls_over_the_first_epochs() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), "20");
    ok(
        tmp.path(),
        &["train", "--data", "data", "--out", "run", "--kernel", "winged_edge", "--hidden-width", "16", "--epochs", "5"],
    );
    let losses = train_losses(&tmp.path().join("run/training_log.json"));
    assert_eq!(losses.len(), 5);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    for file in ["model.bin", "training_log.csv", "loss.svg", "split.json", "run_config.json"] {
        assert!(tmp.path().join("run").join(file).is_file(), "{file}");
    }
}

#[test]
fn runs_are_reproducible_and_write_only_under_out() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), "12");
    let args = |out: &'static str| {
        vec!["train", "--data", "data", "--out", out, "--hidden-width", "8", "--epochs", "3", "--seed", "11"]
    };
    ok(tmp.path(), &args("a"));
    ok(tmp.path(), &args("b"));
    for file in ["training_log.json", "model.bin", "split.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(file)).unwrap(), fs::read(tmp.path().join("b").join(file)).unwrap());
    }
    let entries: BTreeSet<String> =
        fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(entries, ["a", "b", "data"].iter().map(|s| s.to_string()).collect());
}

#[test]
fn zero_epochs_saves_the_initial_model() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), "6");
    ok(tmp.path(), &["train", "--data", "data", "--out", "run", "--hidden-width", "8", "--epochs", "0"]);
    assert!(tmp.path().join("run/model.bin").is_file());
    assert_eq!(read_json(&tmp.path().join("run/training_log.json")), Value::Array(vec![]));
    let csv = fs::read_to_string(tmp.path().join("run/training_log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    ok(tmp.path(), &["eval", "--model", "run/model.bin", "--data", "data", "--out", "ev"]);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), "6");
    fs::write(
        tmp.path().join("run.toml"),
        "data = \"data\"\nout = \"run\"\nepochs = 4\nhidden_width = 8\nkernel = \"simple_edge\"\n",
    )
    .unwrap();
    ok(tmp.path(), &["train", "--config", "run.toml", "--epochs", "2"]);
    assert_eq!(train_losses(&tmp.path().join("run/training_log.json")).len(), 2);
    let config = read_json(&tmp.path().join("run/run_config.json"));
    assert_eq!(config["hidden_width"], 8);
    assert_eq!(config["kernel"], "simple_edge");

    fs::write(tmp.path().join("bad.toml"), "colour = 3\n").unwrap();
    let out = brepnet(tmp.path(), &["train", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(last_stderr_json(&out)["error"]["kind"], "config");
}

#[test]
fn eval_report_agrees_with_a_recount_of_predictions() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), "10");
    ok(tmp.path(), &["train", "--data", "data", "--out", "run", "--hidden-width", "8", "--epochs", "2"]);
    ok(tmp.path(), &["eval", "--model", "run/model.bin", "--data", "data", "--out", "ev"]);
    ok(tmp.path(), &["predict", "--model", "run/model.bin", "--data", "data", "--out", "pr"]);

    let report = read_json(&tmp.path().join("ev/eval_report.json"));
    let classes = report["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 8);
    for c in classes {
        for key in ["class", "iou", "support", "predicted"] {
            assert!(c.get(key).is_some(), "{key}");
        }
    }

    // recount from the raw documents and the per-face predictions
    let mut truth = std::collections::HashMap::new();
    for entry in fs::read_dir(tmp.path().join("data")).unwrap() {
        let doc = read_json(&entry.unwrap().path());
        let labels: Vec<u64> = doc["faces"].as_array().unwrap().iter().map(|f| f["label"].as_u64().unwrap()).collect();
        truth.insert(doc["id"].as_str().unwrap().to_string(), labels);
    }
    let mut confusion = [[0usize; 8]; 8];
    for solid in read_json(&tmp.path().join("pr/predictions.json")).as_array().unwrap() {
        let labels = &truth[solid["id"].as_str().unwrap()];
        for face in solid["faces"].as_array().unwrap() {
            let probs: Vec<f64> = face["probabilities"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let label = face["label"].as_u64().unwrap() as usize;
            confusion[labels[face["face"].as_u64().unwrap() as usize] as usize][label] += 1;
        }
    }
    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..8).map(|k| confusion[k][k]).sum();
    assert_eq!(report["num_faces"].as_u64().unwrap() as usize, total);
    assert!((report["accuracy"].as_f64().unwrap() - correct as f64 / total as f64).abs() < 1e-12);
    for (k, c) in classes.iter().enumerate() {
        let support: usize = confusion[k].iter().sum();
        let predicted: usize = (0..8).map(|r| confusion[r][k]).sum();
        assert_eq!(c["support"].as_u64().unwrap() as usize, support);
        assert_eq!(c["predicted"].as_u64().unwrap() as usize, predicted);
        let union = support + predicted - confusion[k][k];
        if union == 0 {
            assert!(c["iou"].is_null());
        } else {
            assert!((c["iou"].as_f64().unwrap() - confusion[k][k] as f64 / union as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn a_single_solid_is_memorized() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--out", "data", "--count", "1", "--kind", "box_with_hole", "--seed", "5"]);
    ok(
        tmp.path(),
        &[
            "train", "--data", "data", "--out", "run", "--hidden-width", "16", "--epochs", "150",
            "--learning-rate", "0.01", "--train-ratio", "1", "--validation-ratio", "0", "--test-ratio", "0",
        ],
    );
    ok(
        tmp.path(),
        &["eval", "--model", "run/model.bin", "--data", "data", "--out", "ev", "--subset", "train", "--split-file", "run/split.json"],
    );
    assert_eq!(read_json(&tmp.path().join("ev/eval_report.json"))["accuracy"], 1.0);
}

#[test]
fn gradcheck_exit_status_follows_the_result() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["gradcheck", "--out", "gc"]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["passed"], true);
    assert!(tmp.path().join("gc/gradcheck_report.json").is_file());

    let bad = brepnet(tmp.path(), &["gradcheck", "--corrupt-backward"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(last_stderr_json(&bad)["error"]["kind"], "gradcheck_failed");
}

#[test]
fn inspect_follows_walks_like_the_pointers_do() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--out", "data", "--count", "1", "--kind", "box"]);
    let path = fs::read_dir(tmp.path().join("data")).unwrap().next().unwrap().unwrap().path();
    let doc = read_json(&path);
    let c = doc["coedges"].as_array().unwrap();
    let field = |i: usize, k: &str| c[i][k].as_u64().unwrap() as usize;
    let id = doc["id"].as_str().unwrap();
    for start in [0usize, 5, 17] {
        let expected = field(field(field(start, "mate"), "next"), "edge");
        let out = ok(
            tmp.path(),
            &["inspect", "--data", "data", "--solid", id, "--walk", "MNE", "--coedge", &start.to_string()],
        );
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("6 faces, 12 edges, 24 coedges"), "{text}");
        assert!(text.contains(&format!("from coedge {start}: edge {expected}\n")), "{text}");
    }

    let bad = brepnet(tmp.path(), &["inspect", "--data", "data", "--walk", "MNQ"]);
    assert_eq!(bad.status.code(), Some(1));
    let err = last_stderr_json(&bad);
    assert_eq!(err["error"]["kind"], "walk");
    assert_eq!(err["error"]["column"], 3);
}

#[test]
fn compile_walks_matches_inspect() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["synth", "--out", "data", "--count", "1", "--kind", "n_prism", "--sides", "5"]);
    let out = ok(tmp.path(), &["compile-walks", "--data", "data", "--walk", "NF", "--walk", "MPE"]);
    let compiled: Value = serde_json::from_slice(&out.stdout).unwrap();
    let walks = compiled[0]["walks"].as_array().unwrap();
    assert_eq!(walks.len(), 2);
    assert_eq!(walks[0]["target"], "face");
    assert_eq!(walks[1]["target"], "edge");
    assert_eq!(walks[0]["dest"].as_array().unwrap().len(), 30);

    ok(tmp.path(), &["compile-walks", "--data", "data", "--kernel", "asymmetric_plus", "--out", "cw"]);
    let kernel = read_json(&tmp.path().join("cw/walks.json"));
    assert_eq!(kernel[0]["kernel"], "asymmetric_plus");
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = brepnet(tmp.path(), &["train", "--epochs", "many"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(last_stderr_json(&out)["error"]["kind"], "usage");
    let missing = brepnet(tmp.path(), &["eval", "--model", "nope.bin", "--data", "nope", "--out", "x"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!tmp.path().join("x").exists());
}
