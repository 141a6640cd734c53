use qsplab_core::mbqc::GraphPattern;
use std::path::Path;
use std::process::{Command, Output};

fn qsplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn body(path: &Path) -> String {
    qsplab_cli::output::csv_body(&std::fs::read_to_string(path).unwrap())
}

#[test]
fn homodyne_csv_has_metadata_header_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = qsplab(&[
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
            "homodyne-sample",
            "--shots",
            "50",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(a.join("homodyne-sample.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# version: "));
    assert_eq!(lines[1], "# experiment: homodyne-sample");
    assert!(lines[2].starts_with("# config_sha256: "));
    assert_eq!(lines[3], "# seed: 11");
    assert_eq!(
        lines[4],
        "shot_id,mode,basis,theta,raw_x,logical_bit,weight"
    );
    assert_eq!(lines.len(), 55);
    assert_eq!(
        std::fs::read(a.join("homodyne-sample.csv")).unwrap(),
        std::fs::read(b.join("homodyne-sample.csv")).unwrap()
    );
    let other = dir.path().join("c");
    qsplab(&[
        "--seed",
        "12",
        "--out",
        other.to_str().unwrap(),
        "homodyne-sample",
        "--shots",
        "50",
    ]);
    assert_ne!(
        body(&a.join("homodyne-sample.csv")),
        body(&other.join("homodyne-sample.csv"))
    );
}

#[test]
fn flags_override_the_config_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "truncation-study", "seed": 3, "params": {"n_bar": 0.5, "tol": 0.5}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = qsplab(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "truncation-study",
        "--tol",
        "0.01",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("truncation-study.json")).unwrap())
            .unwrap();
    assert_eq!(side["config"]["seed"], 3);
    assert_eq!(side["config"]["params"]["tol"], 0.01);
    assert_eq!(side["summary"]["budget"]["r_max"], 30);
    assert_eq!(side["metadata"]["seed"], "3");
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "init-fidelity", "params": {"alhpa": 1}}"#,
    )
    .unwrap();
    let o = qsplab(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "init-fidelity",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alhpa"));

    let o = qsplab(&[
        "--out",
        dir.path().to_str().unwrap(),
        "init-fidelity",
        "--n-bar",
        "1,x",
    ]);
    assert_eq!(code(&o), 2);
    let o = qsplab(&[
        "--out",
        dir.path().to_str().unwrap(),
        "init-fidelity",
        "--n-bar=-1",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn oversized_dense_pattern_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = dir.path().join("line.json");
    std::fs::write(
        &pattern,
        GraphPattern::linear(&[0.3, 0.2]).unwrap().to_json(),
    )
    .unwrap();
    let o = qsplab(&[
        "--out",
        dir.path().to_str().unwrap(),
        "--backend",
        "dense",
        "mbqc-run",
        "--pattern",
        pattern.to_str().unwrap(),
        "--alpha",
        "1",
        "--n-bar",
        "0",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn inadequate_cutoff_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsplab(&[
        "--out",
        dir.path().to_str().unwrap(),
        "init-fidelity",
        "--alpha",
        "3",
        "--n-bar",
        "0",
        "--cutoff",
        "12",
    ]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cutoff too small"));
    assert!(!dir.path().join("init-fidelity.csv").exists());
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qsplab"))
        .env("QSPLAB_THREADS", "0")
        .args(["--out", dir.path().to_str().unwrap(), "truncation-study"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_qsplab"))
        .env("QSPLAB_THREADS", "1")
        .args(["--out", dir.path().to_str().unwrap(), "truncation-study"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn dense_wire_postselection_reports_oracle_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsplab(&[
        "--out",
        dir.path().to_str().unwrap(),
        "--backend",
        "dense",
        "mbqc-run",
        "--alpha",
        "2",
        "--n-bar",
        "0",
        "--selection",
        "postselect:1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mbqc-run.json")).unwrap())
            .unwrap();
    assert!(side["summary"]["oracle_fidelity"].as_f64().unwrap() > 0.99);
    let text = std::fs::read_to_string(dir.path().join("mbqc-run.csv")).unwrap();
    let row = text.lines().nth(5).unwrap();
    assert!(
        row.starts_with("0,0,XY,7.8539816339744828e-1,,-1,"),
        "{row}"
    );
}
