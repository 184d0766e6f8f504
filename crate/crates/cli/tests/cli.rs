use std::path::PathBuf;
use std::process::Command;

fn lfmkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lfmkit"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn listing_is_stable_and_complete() {
    let a = lfmkit().arg("list-experiments").output().unwrap();
    let b = lfmkit().arg("list-experiments").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().count() >= 6);
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    for required in ["normalization", "thm1-trace", "thm3-logdet", "thm4-cov", "feynman-vs-oracle", "anomaly-flagship"]
    {
        assert!(names.contains(&required), "{required} missing from {names:?}");
    }
}

#[test]
fn missing_config_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfmkit().args(["run", "missing.cfg", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cfg"));
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[normalization]\nn_max = \"eight\"\ncolour = 1\n[nonexistent]\n").unwrap();
    let out = lfmkit().arg("run").arg(&cfg).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["n_max", "colour", "nonexistent"] {
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn normalization_config_passes_and_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        lfmkit().arg("run").arg(config("normalization.cfg")).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("normalization.json")).unwrap()).unwrap();
    for key in ["experiment", "inputs", "outputs", "tolerance", "pass", "wall_time_s", "seed"] {
        assert!(doc.get(key).is_some(), "{key}");
    }
    let rows = doc["outputs"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert!(r["deviation"].as_f64().unwrap() < 1e-10);
    }
    assert!(dir.path().join("normalization.csv").exists());
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn scaling_config_reports_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfmkit().arg("run").arg(config("thm4_scaling.cfg")).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("thm4_scaling.csv")).unwrap();
    assert!(csv.starts_with("case,lhs_re,lhs_im,rhs_re,rhs_im,gap\nscaling,"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("thm4_scaling.json")).unwrap()).unwrap();
    assert_eq!(doc["experiment"], "thm4-cov");
    assert_eq!(doc["label"], "thm4_scaling");
    let lhs = doc["outputs"]["rows"][0]["lhs"][0].as_f64().unwrap();
    assert!((lhs - 2f64.exp()).abs() < 1e-10);
}

#[test]
fn failing_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.cfg");
    std::fs::write(&cfg, "[trotter-order]\nslope_tolerance = 0.0\n").unwrap();
    let out = lfmkit().arg("run").arg(&cfg).arg("--output-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    std::fs::write(&cfg, "seed = 3\n[shift-invariance]\n").unwrap();
    let out = lfmkit().arg("run").arg(&cfg).args(["--seed", "99", "--output-dir"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("shift-invariance.json")).unwrap()).unwrap();
    assert_eq!(doc["seed"], 99);
}
