use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kgrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgrecon")).args(args).output().expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(kgrecon(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kgrecon(&["train", "--epochs", "many"]).status.code(), Some(2));
    assert_eq!(kgrecon(&[]).status.code(), Some(2));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |out: &Path| json_out(&kgrecon(&["train", "--epochs", "3", "--seed", "4", "--out", arg(out)]));
    let (ra, rb) = (run(&a), run(&b));
    assert_eq!(ra["data"]["checkpoint_sha256"], rb["data"]["checkpoint_sha256"]);
    assert_eq!(std::fs::read(a.join("checkpoint.json")).unwrap(), std::fs::read(b.join("checkpoint.json")).unwrap());
    // The output directory is not part of the hash.
    assert_eq!(ra["config_hash"], rb["config_hash"]);
    let other = json_out(&kgrecon(&["train", "--epochs", "3", "--seed", "5", "--out", arg(&a)]));
    assert_ne!(other["data"]["checkpoint_sha256"], ra["data"]["checkpoint_sha256"]);
    assert_ne!(other["config_hash"], ra["config_hash"]);
}

#[test]
fn pipeline_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = arg(&out);
    let gen = json_out(&kgrecon(&["generate", "--out", o]));
    assert_eq!(gen["data"]["relations"], 11);
    let data = out.join("dataset");
    let d = arg(&data);
    let common = ["--out", o, "--dataset", d, "--format", "tsv", "--epochs", "20"];
    let with = |extra: &[&str]| {
        let mut v: Vec<&str> = extra.to_vec();
        v.extend_from_slice(&common);
        kgrecon(&v)
    };
    let trained = json_out(&with(&["train"]));
    assert!(trained["data"]["epoch_losses"].as_array().unwrap().len() == 20);
    let lp = json_out(&with(&["link-predict"]));
    assert!(lp["data"]["mrr"].as_f64().unwrap() > 0.0);
    assert_eq!(lp["config_hash"], trained["config_hash"]);

    let x = json_out(&with(&["explain", "--triple", "cleaning_rag ObjUsedTo wipe"]));
    assert_eq!(x["kind"], "explanation");
    assert_eq!(x["data"]["query"]["h"], "cleaning_rag");
    assert!(x["data"]["text"].as_str().unwrap().ends_with("a cleaning rag is used to wipe."));
    let bad = with(&["explain", "--triple", "cleaning_rag Nope wipe"]);
    assert_eq!(bad.status.code(), Some(1));

    let plan = json_out(&with(&["corrupt", "--rate", "0.1"]));
    assert!(!plan["data"]["entries"].as_array().unwrap().is_empty());
    let sim = json_out(&with(&["simulate-corrections", "--rate", "0.1", "--accuracy", "1.0", "--apply"]));
    assert_eq!(sim["data"]["records"], plan["data"]["entries"].as_array().unwrap().len());
    for f in [
        "checkpoint.json",
        "train_report.json",
        "plan.json",
        "corrupted.json",
        "corrections.jsonl",
        "corrected.json",
        "config.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\n[train]\nepochs = 2\nentity_dim = 4\nrelation_dim = 4\n").unwrap();
    let out = dir.path().join("o");
    let r = json_out(&kgrecon(&["train", "--config", arg(&cfg), "--epochs", "1", "--out", arg(&out)]));
    assert_eq!(r["data"]["epoch_losses"].as_array().unwrap().len(), 1);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["seed"], 3);
    assert_eq!(saved["train"]["entity_dim"], 4);
}
