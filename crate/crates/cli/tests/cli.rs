use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, sub: &str, config: &str, out: &str) -> Output {
    let cfg = dir.join(format!("{out}.json"));
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_wptlab"))
        .args([sub, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn read_csv(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL_S1: &str = r#"{
    "scenario": {"name": "s1-default"},
    "manifold": {"kind": "circle", "resolution": 64},
    "discretization": {"steps": 48, "q": [4, 8, 16]}
}"#;

#[test]
fn schema_violations_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        r#"{"scenario": {"name": "s1-default", "colour": "red"}}"#,
        r#"{"scenario": {"name": "s9-default"}}"#,
        r#"{"scenario": {"name": "s1-default"}, "discretization": {"steps": 50, "q": [8]}}"#,
        r#"{"scenario": {"name": "t2-default"}, "manifold": {"kind": "circle", "resolution": 64}}"#,
        r#"not json"#,
    ];
    for (i, cfg) in cases.iter().enumerate() {
        let out = run(dir.path(), "compare", cfg, &format!("bad{i}"));
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(dir.path(), "delta-transport", SMALL_S1, "wrong_kind");
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), "geodesic-check", r#"{"scenario": {"name": "sphere-delta-default"}}"#, "no_grid");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wptlab"))
        .args(["sweep", "--config"])
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tolerance_failure_names_the_row() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{
        "scenario": {"name": "s1-default"},
        "manifold": {"kind": "circle", "resolution": 64},
        "discretization": {"steps": 48, "q": [4, 8, 16]},
        "tolerances": {"relative_err_0": 1e-12}
    }"#;
    let out = run(dir.path(), "compare", cfg, "strict");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row Q=4") && err.contains("relative_err_0"), "{err}");
    // the artifacts are still written
    assert!(dir.path().join("strict/results.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("strict/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn sweep_on_circle_decreases_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"scenario": {"name": "s1-default"}}"#;
    let out = run(dir.path(), "sweep", cfg, "a");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("a/results.csv"));
    assert_eq!(header, ["Q", "err_0", "err_path", "norm_drift", "weak_residual"]);
    let q: Vec<f64> = column(&header, &rows, "Q");
    assert_eq!(q, [8.0, 16.0, 32.0, 64.0]);
    let err = column(&header, &rows, "err_0");
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");

    let serial = r#"{"scenario": {"name": "s1-default"}, "experiment": {"threads": 1}}"#;
    let out = run(dir.path(), "sweep", serial, "b");
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains(&b'\r'));
}

#[test]
fn summary_embeds_resolved_config() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "scheme-transport", SMALL_S1, "s");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s/summary.json")).unwrap()).unwrap();
    let config = &summary["config"];
    assert_eq!(config["manifold"]["resolution"], 64);
    assert_eq!(config["discretization"]["steps"], 48);
    assert_eq!(config["scenario"]["potential_scale"], 1.0);
    assert_eq!(config["tolerances"]["contraction"], 0.75);
    assert_eq!(config["scenario"]["terminal"].as_array().unwrap().len(), 2);
    assert_eq!(summary["command"], "scheme-transport");
    assert_eq!(summary["passed"], true);
}

#[test]
fn constant_path_geodesic_check_is_clean() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{
        "scenario": {"name": "s1-default", "potential_scale": 0.0},
        "manifold": {"kind": "circle", "resolution": 64},
        "discretization": {"steps": 20},
        "output": {"fields": true}
    }"#;
    let out = run(dir.path(), "geodesic-check", cfg, "flat");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("flat/results.csv"));
    for name in ["mass_error", "continuity_residual"] {
        assert!(column(&header, &rows, name).iter().all(|v| v.abs() <= 1e-10));
    }
    let (fh, frows) = read_csv(dir.path().join("flat/fields/density_0.csv"));
    assert_eq!(fh, ["x", "value"]);
    assert_eq!(frows.len(), 64);
}

#[test]
fn flat_delta_transport_is_exact() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"scenario": {"name": "torus-delta-default"}, "discretization": {"q": [1]}}"#;
    let out = run(dir.path(), "delta-transport", cfg, "torus");
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = read_csv(dir.path().join("torus/results.csv"));
    assert_eq!(column(&header, &rows, "err"), [0.0]);
}

#[test]
fn sphere_delta_transport_passes_defaults() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "delta-transport", r#"{"scenario": {"name": "sphere-delta-default"}}"#, "sphere");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("sphere/results.csv"));
    let err = column(&header, &rows, "err");
    assert!(err.windows(2).all(|w| w[1] <= 0.75 * w[0]));
}

#[test]
fn corrupted_endpoint_fails_weak_residual() {
    let dir = TempDir::new().unwrap();
    let clean = run(dir.path(), "weak-residual", SMALL_S1, "clean");
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stderr));
    let cfg = r#"{
        "scenario": {"name": "s1-default"},
        "manifold": {"kind": "circle", "resolution": 64},
        "discretization": {"steps": 48},
        "experiment": {"corrupt_endpoint": 1.0}
    }"#;
    let out = run(dir.path(), "weak-residual", cfg, "corrupt");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weak_residual"));
}

#[test]
fn pde_transport_reports_conserved_pairing() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), "pde-transport", SMALL_S1, "pde");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(dir.path().join("pde/results.csv"));
    let pairing = column(&header, &rows, "pairing");
    let last = *pairing.last().unwrap();
    assert!(pairing.iter().all(|p| (p - last).abs() <= 1e-4 * last));
}
