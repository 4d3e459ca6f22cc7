use std::process::Command;

fn boussq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boussq"))
}

#[test]
fn help_lists_every_scenario() {
    let out = boussq().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "eigen-check",
        "proj-bound",
        "dispersion",
        "converge-prepared",
        "nonconverge-hs",
        "nonconverge-mu1",
        "dichotomy",
        "continuity-N",
        "continuity-mu",
        "duhamel-decay",
        "conservation",
    ] {
        assert!(text.contains(name), "{name} missing from help");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = boussq()
        .args(["converge-prepared", "--grid", "9", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{ "not_a_field": 1 }"#).unwrap();
    let out = boussq().args(["eigen-check", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eigen_check_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{ "hessian_trials": 50 }"#).unwrap();
    let out = boussq()
        .args(["eigen-check", "--trials", "200", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 5);
    assert!(!text.contains("FAIL"));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["trials"], 200);
    assert_eq!(summary["config"]["hessian_trials"], 50);
    assert!(dir.path().join("records.csv").exists());
}
