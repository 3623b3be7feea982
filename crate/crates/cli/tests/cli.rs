use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn llmhar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llmhar"))
        .args(args)
        .current_dir(dir)
        .env("LLMHAR_LOG", "warn")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path) {
    fs::write(
        dir.join("teacher.json"),
        r#"{
  "dataset": "data/events.jsonl",
  "profile": "data/profile.json",
  "run_dir": "runs/teacher",
  "split": {"policy": "per-scenario", "manifest": "data/scenarios.json"},
  "target": "all",
  "backend": {"kind": "mock", "script": {"mode": "oracle", "think": true, "drop_every": 10}},
  "report": {"model": "teacher", "params_billion": 32, "baseline": "Teacher model"},
  "ablation_ks": [1, 2]
}"#,
    )
    .unwrap();
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let synth = json(&llmhar(d, &["--json", "synth", "--out-dir", "data", "--sessions", "4", "--events", "40", "--seed", "3"]));
    assert_eq!(synth["event_count"], 160);

    assert!(json(&llmhar(d, &["--json", "validate", "--profile", "data/profile.json", "--dataset", "data/events.jsonl"]))
        .as_array()
        .unwrap()
        .is_empty());

    write_config(d);
    let run = json(&llmhar(d, &["--json", "run", "--config", "teacher.json"]));
    assert_eq!(run["missed"], "10.00 ± 0.00");
    assert_eq!(run["queried"], 16);
    let again = json(&llmhar(d, &["--json", "run", "--config", "teacher.json"]));
    assert_eq!(again["queried"], 0);

    // pairs of sessions form scenarios, so s01 and s03 train
    let corpus = json(&llmhar(d, &["--json", "distill", "--config", "teacher.json", "--out", "corpus/full.jsonl"]));
    assert_eq!(corpus["sessions"], serde_json::json!(["s01", "s03"]));
    assert_eq!(corpus["records"], 8);

    let ablate = json(&llmhar(d, &["--json", "ablate", "--config", "teacher.json", "--out-dir", "ablation"]));
    assert_eq!(ablate.as_array().unwrap().len(), 2);
    assert!(d.join("ablation/corpus_k1.manifest.json").exists());

    let report = json(&llmhar(d, &["--json", "report", "--out-dir", "reports", "runs/teacher/report.json"]));
    assert_eq!(report["size_points"], 1);
    assert!(d.join("reports/summary.csv").exists());
    assert!(d.join("reports/size_sweep.svg").exists());
}

#[test]
fn validation_problems_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    json(&llmhar(d, &["--json", "synth", "--out-dir", "data", "--sessions", "1", "--events", "30"]));
    let profile = fs::read_to_string(d.join("data/profile.json")).unwrap();
    let mut p: serde_json::Value = serde_json::from_str(&profile).unwrap();
    p["rooms"].as_array_mut().unwrap().retain(|r| r["name"] != "kitchen");
    fs::write(d.join("data/profile.json"), p.to_string()).unwrap();
    let out = llmhar(d, &["validate", "--profile", "data/profile.json", "--dataset", "data/events.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"kitchen\""));
}

#[test]
fn errors_are_reported_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = llmhar(dir.path(), &["run", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
