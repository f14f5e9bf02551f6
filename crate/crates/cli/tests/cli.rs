use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cascade-guard");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("CASCADE_GUARD_SEED")
        .output()
        .expect("binary runs")
}

fn positives(csv: &Path) -> usize {
    fs::read_to_string(csv)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .count()
}

#[test]
fn gen_synthetic_has_exact_positive_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "gen",
            "--kind",
            "synthetic",
            "--n",
            "10000",
            "--pos-frac",
            "0.05",
            "--seed",
            "7",
            "--out",
            "d.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(positives(&dir.path().join("d.csv")), 500);
}

#[test]
fn gen_transforms_need_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen", "--kind", "noise", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    run(
        dir.path(),
        &[
            "gen",
            "--kind",
            "synthetic",
            "--n",
            "100",
            "--pos-frac",
            "0.1",
            "--out",
            "d.csv",
        ],
    );
    let out = run(
        dir.path(),
        &[
            "gen",
            "--kind",
            "adversarial",
            "--input",
            "d.csv",
            "--width",
            "5",
            "--out",
            "a.csv",
        ],
    );
    assert!(out.status.success());
    assert_eq!(positives(&dir.path().join("a.csv")), 15);
}

#[test]
fn bench_is_byte_identical_across_jobs() {
    let cfg = r#"{
        "dataset": {"kind": "synthetic", "n": 3000, "pos_frac": 0.1, "seed": 3},
        "query": {"kind": "pt", "target": 0.9, "delta": 0.1, "budget": 300},
        "method": "pt-a",
        "runs": 12,
        "base_seed": 5
    }"#;
    let bench = |jobs: &str| {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cfg.json"), cfg).unwrap();
        let out = run(
            dir.path(),
            &[
                "bench", "--config", "cfg.json", "--jobs", jobs, "--out", "r.json",
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (
            fs::read(dir.path().join("r.json")).unwrap(),
            fs::read(dir.path().join("r.csv")).unwrap(),
        )
    };
    let one = bench("1");
    assert_eq!(one, bench("1"));
    assert_eq!(one, bench("4"));
}

#[test]
fn flags_override_config_and_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "dataset": {"kind": "synthetic", "n": 2000, "pos_frac": 0.1, "seed": 3},
        "query": {"kind": "pt", "target": 0.9, "delta": 0.1, "budget": 300},
        "method": "a",
        "runs": 3
    }"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let out = run(
        dir.path(),
        &[
            "bench", "--config", "cfg.json", "--M", "7", "--target", "0.8", "--seed", "9",
            "--jobs", "2", "--out", "r.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["params"]["M"], 7);
    assert_eq!(report["config"]["query"]["target"], 0.8);
    assert_eq!(report["config"]["base_seed"], 9);
    assert_eq!(report["config"]["method"], "pt-a");
}

#[test]
fn env_seed_overrides_config_but_not_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "dataset": {"kind": "synthetic", "n": 1000, "pos_frac": 0.1, "seed": 3},
        "query": {"kind": "at", "target": 0.9, "delta": 0.1},
        "method": "at-aa",
        "runs": 2,
        "base_seed": 1
    }"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(BIN);
        cmd.args(["bench", "--config", "cfg.json", "--out", "r.json"])
            .args(extra)
            .current_dir(dir.path());
        match env {
            Some(v) => cmd.env("CASCADE_GUARD_SEED", v),
            None => cmd.env_remove("CASCADE_GUARD_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
        v["config"]["base_seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&[], None), 1);
    assert_eq!(seed_of(&[], Some("42")), 42);
    assert_eq!(seed_of(&["--seed", "7"], Some("42")), 7);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["bench", "--nope"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    fs::write(dir.path().join("bad.json"), r#"{"dataset": {"kind": "synthetic", "n": 10, "pos_frac": 0.1, "seed": 1}, "query": {"kind": "pt", "target": 0.9, "delta": 0.1, "budget": 5}, "method": "pt-a", "extra": 1}"#).unwrap();
    let out = run(dir.path(), &["bench", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("extra"));
    let out = run(
        dir.path(),
        &["bench", "--config", "bad.json", "--method", "at-aa"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_prints_outcome_json() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &[
            "gen",
            "--kind",
            "synthetic",
            "--n",
            "500",
            "--pos-frac",
            "0.2",
            "--out",
            "d.csv",
        ],
    );
    let out = run(
        dir.path(),
        &[
            "run",
            "--dataset",
            "d.csv",
            "--query",
            "rt",
            "--target",
            "0.9",
            "--budget",
            "100",
            "--method",
            "u",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outcome"]["method"], "rt-u");
    assert_eq!(v["outcome"]["answer"].as_array().unwrap().len(), 500);
    assert!(v["evaluation"]["met_target_dense"].is_boolean());
}

#[test]
fn sweep_writes_one_report_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "dataset": {"kind": "synthetic", "n": 2000, "pos_frac": 0.1, "seed": 3},
        "query": {"kind": "pt", "target": 0.9, "delta": 0.1, "budget": 200},
        "method": "pt-a",
        "runs": 2,
        "sweep": {"axis": "M", "values": [1, 20]}
    }"#;
    fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let out = run(
        dir.path(),
        &["sweep", "--config", "cfg.json", "--out", "s.json"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("s_M1.json").exists());
    assert!(dir.path().join("s_M20.csv").exists());
    let bad = run(
        dir.path(),
        &[
            "sweep", "--config", "cfg.json", "--axis", "beta", "--values", "0.1",
        ],
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn validate_exits_zero_when_bounds_hold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "validate", "--trials", "2000", "--seed", "1", "--out", "v.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let a = fs::read(dir.path().join("v.json")).unwrap();
    run(
        dir.path(),
        &[
            "validate", "--trials", "2000", "--seed", "1", "--out", "v.json",
        ],
    );
    assert_eq!(a, fs::read(dir.path().join("v.json")).unwrap());
}
