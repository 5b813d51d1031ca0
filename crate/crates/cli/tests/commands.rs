use std::path::Path;
use std::process::{Command, Output};

fn covpref(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covpref"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn lint_clean_file_is_silent() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "toy1.hdl", covpref::corpus::TOY1);
    let o = covpref(&["lint", &f], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn lint_reports_one_issue_for_assign_to_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "bad.hdl",
        "module bad (input a[1], output y[1]);\n  assign a = 1;\n  assign y = a;\nendmodule\n",
    );
    let o = covpref(&["lint", &f], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1, "{out}");
    assert!(out.contains("assign_to_input"));
    assert!(out.contains(":2:"));
}

#[test]
fn lint_missing_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = covpref(&["lint", "no_such.hdl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn lint_parse_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "p.hdl",
        "module p (input a[1], output y[1]);\n assign y = a\nendmodule\n",
    );
    let o = covpref(&["lint", &f], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

fn average(o: &Output) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["average"].as_f64().unwrap()
}

#[test]
fn simulate_tokens_and_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "toy1.hdl", covpref::corpus::TOY1);
    let o = covpref(&["simulate", &f, "--stim", "1,0"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(average(&o), 1.0);

    let o = covpref(&["simulate", &f, "--stim", "a=1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!((average(&o) - 5.0 / 9.0).abs() < 1e-12);

    let o = covpref(&["simulate", &f, "--stim", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("codec"));
}

#[test]
fn simulate_accepts_bundled_name_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = covpref(
        &["simulate", "toy1", "--stim", "1,0", "--trace"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_config_names_field_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"train": {"learning_rat": 1.0}}"#);
    let o = covpref(&["curate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rat"));
}

fn small_config(dir: &Path) -> String {
    write(
        dir,
        "small.json",
        r#"{
  "paths": {"report_dir": "out"},
  "curation": {"pairs_per_dut": 300, "teacher": "novelty"},
  "train": {"epochs": 5, "learning_rate": 5.0, "beta": 0.2},
  "eval": {"n": 5}
}"#,
    )
}

#[test]
fn pipeline_by_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = |args: &[&str]| {
        let o = covpref(args, dir.path());
        assert_eq!(
            o.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    };
    run(&["curate", "--config", &cfg]);
    assert!(dir.path().join("out/dataset.jsonl").is_file());
    run(&[
        "train",
        "--config",
        &cfg,
        "--mode",
        "cddpo",
        "--f-variant",
        "dataset_minmax",
    ]);
    let history: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/history_cddpo.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(history["config"]["beta"], 0.2);
    assert_eq!(history["config"]["f_variant"], "dataset_minmax");
    assert_eq!(history["epochs"].as_array().unwrap().len(), 5);

    let o = run(&[
        "eval",
        "--config",
        &cfg,
        "--checkpoint",
        "out/policy_cddpo.json",
    ]);
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(
        reports.as_array().unwrap().len(),
        covpref::corpus::BUNDLED.len()
    );
    assert_eq!(reports[0]["generations"].as_array().unwrap().len(), 5);

    run(&["ablate", "--config", &cfg]);
    let csv = std::fs::read_to_string(dir.path().join("out/ablation.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("policy,dut,metric,stat,value"));
    assert_eq!(
        csv.lines().count(),
        1 + 4 * covpref::corpus::BUNDLED.len() * 4 * 2
    );
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let policy = covpref::policy::TabularPolicy::new(covpref::codec::Vocab { wmax: 3 }, 2, 8);
    write(dir.path(), "p.json", &policy.to_json().unwrap());
    let o = covpref(
        &["eval", "--config", &cfg, "--checkpoint", "p.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_without_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = covpref(&["train", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn demo_artifacts_are_complete_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for out in ["a", "b"] {
        let o = covpref(&["demo", "--config", &cfg, "--report-dir", out], dir.path());
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    for name in covpref_cli::commands::DEMO_ARTIFACTS {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        if *name == "config.json" {
            continue;
        }
        assert!(a == b, "{name} differs between runs");
    }
}
