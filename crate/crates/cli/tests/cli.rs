use std::path::Path;
use std::process::{Command, Output};

fn pinsat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinsat"))
        .args(args)
        .current_dir(dir)
        .env_remove("PINSAT_CONFIG")
        .output()
        .expect("binary runs")
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let o = pinsat(dir.path(), &["generate", "--out", name, "--seed", "11", "--problems", "5"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn report_on_empty_records_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("r.jsonl"),
        "{\"format\":\"pinsat-records\",\"version\":1,\"suite_seed\":7,\"problems\":0}\n",
    )
    .unwrap();
    let o = pinsat(dir.path(), &["report", "--records", "r.jsonl", "--summary", "s.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no records"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pinsat(dir.path(), &["frobnicate"]).status.code(), Some(1));
    std::fs::write(dir.path().join("bad.toml"), "[limits]\nvelocity = -1\n").unwrap();
    let o = pinsat(dir.path(), &["--config", "bad.toml", "kmin"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    let o = Command::new(env!("CARGO_BIN_EXE_pinsat"))
        .arg("kmin")
        .current_dir(dir.path())
        .env("PINSAT_CONFIG", "bad.toml")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bundled_and_repo_configs_agree() {
    let repo = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml")).unwrap();
    assert_eq!(repo, pinsat::bench::DEFAULT_CONFIG);
}

#[test]
fn smoke_pipeline_runs_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: &[&[&str]] = &[
        &["generate", "--out", "suite.json", "--problems", "3"],
        &[
            "run", "--suite", "suite.json", "--out", "rec.jsonl", "--budgets", "1,2", "--timeout", "10", "--quiet",
        ],
        &[
            "report", "--records", "rec.jsonl", "--summary", "sum.json", "--suite", "suite.json", "--plot-data",
            "plot.json",
        ],
        &["validate", "--suite", "suite.json", "--records", "rec.jsonl"],
    ];
    for args in steps {
        let o = pinsat(d, args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let lines = std::fs::read_to_string(d.join("rec.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 1 + 3 * 4 * 2);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("sum.json")).unwrap()).unwrap();
    assert_eq!(summary["format"], "pinsat-summary");
    let plot: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("plot.json")).unwrap()).unwrap();
    assert_eq!(plot["format"], "pinsat-plot-data");
}

#[test]
fn zero_timeout_fails_every_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(pinsat(d, &["generate", "--out", "s.json", "--problems", "2"]).status.success());
    let o = pinsat(
        d,
        &["run", "--suite", "s.json", "--out", "r.jsonl", "--timeout", "0", "--budgets", "1", "--quiet"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("r.jsonl")).unwrap();
    for line in text.lines().skip(1) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["success"], false, "{line}");
        assert_eq!(v["status"], "timeout", "{line}");
    }
}
