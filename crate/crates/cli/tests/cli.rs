use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn catsynth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catsynth"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const ONOFF: &str = r#"{
  "scheme": "onoff",
  "params": {"r": 0.3, "t": 0.95, "c_plus": [3, 0], "c_minus": [-1, 0]},
  "optimal_beta": true,
  "detectors": {"b": {"eta": 0.1, "nu": 1e-7}, "c": {"eta": 0.1, "nu": 1e-7}},
  "engine": "both",
  "grid": {"x_min": -5, "x_max": 5, "x_points": 41, "p_min": -5, "p_max": 5, "p_points": 41},
  "output_dir": "gen"
}"#;

#[test]
fn fig3_writes_grids_and_fidelities() {
    let dir = TempDir::new().unwrap();
    let out = catsynth(dir.path(), &["reproduce-fig3", "--out", "f3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let f3 = dir.path().join("f3");
    let report = read_json(&f3.join("fig3_fidelities.json"));
    assert!((report["vacuum_norm"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    let panels = report["panels"].as_array().unwrap();
    assert_eq!(panels.len(), 4);
    for p in panels {
        assert_eq!(p["within_tolerance"], Value::Bool(true), "{p}");
        assert!(p["fock_gaussian_delta"].as_f64().unwrap() < 1e-4);
        let csv = fs::read_to_string(f3.join(p["wigner_csv"].as_str().unwrap())).unwrap();
        assert!(csv.starts_with("x,p,w\n"));
        assert_eq!(csv.lines().count(), 1 + 201 * 201);
    }
}

#[test]
fn fig2_curves_stay_high_below_unit_amplitude() {
    let dir = TempDir::new().unwrap();
    let out = catsynth(dir.path(), &["reproduce-fig2", "--out", "f2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("f2/fig2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("alpha,F_phi_plus,F_psi1_Cminus,F_psi2_Cplus")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert!(rows[0][1..].iter().all(|&f| f > 1.0 - 1e-6));
    for row in rows.iter().filter(|r| r[0] < 1.0) {
        assert!(row[1] > 0.99, "{row:?}");
    }
}

#[test]
fn generate_is_deterministic_and_echoes_config() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("onoff.json"), ONOFF).unwrap();
    let first = catsynth(dir.path(), &["generate", "--config", "onoff.json"]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let json1 = fs::read(dir.path().join("gen/result.json")).unwrap();
    let csv1 = fs::read(dir.path().join("gen/wigner.csv")).unwrap();
    let second = catsynth(dir.path(), &["generate", "--config", "onoff.json"]);
    assert!(second.status.success());
    assert_eq!(json1, fs::read(dir.path().join("gen/result.json")).unwrap());
    assert_eq!(csv1, fs::read(dir.path().join("gen/wigner.csv")).unwrap());

    let report: Value = serde_json::from_slice(&json1).unwrap();
    assert_eq!(report["config"]["scheme"], "onoff");
    assert!(report["config"]["params"]["beta"][0].as_f64().unwrap() > 0.0);
    let runs = report["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    for run in runs {
        assert!((run["fidelity_vs_target"].as_f64().unwrap() - 0.978).abs() < 0.005);
    }
    assert!(report["fock_gaussian_delta"].as_f64().unwrap() < 1e-4);
    assert!(dir.path().join("gen/wigner_gaussian.csv").exists());
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"scheme": "daokw", "params": {"r": 0.3, "t": 0.95}, "dim": 8, "output_dir": "ignored"}"#,
    )
    .unwrap();
    let out = catsynth(
        dir.path(),
        &[
            "generate", "--config", "c.json", "--dim", "40", "--out", "used",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!dir.path().join("ignored").exists());
    let report = read_json(&dir.path().join("used/result.json"));
    assert_eq!(report["config"]["dim"], 40);
    assert!(report["runs"][0]["fidelity_vs_target"].as_f64().unwrap() > 0.99);
}

#[test]
fn amplify_and_cascade_report_stages() {
    let dir = TempDir::new().unwrap();
    let out = catsynth(dir.path(), &["amplify", "--dim", "40", "--out", "amp"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let amp = read_json(&dir.path().join("amp/amplify.json"));
    assert!(amp["run"]["fidelity_vs_target"].as_f64().unwrap() > 0.999);
    assert!((amp["output_alpha"].as_f64().unwrap() - 0.95 * 2f64.sqrt()).abs() < 1e-12);

    let out = catsynth(dir.path(), &["cascade", "--dim", "40", "--out", "cas"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cas = read_json(&dir.path().join("cas/cascade.json"));
    assert_eq!(cas["stages"].as_array().unwrap().len(), 3);
    assert!((cas["run"]["fidelity_vs_target"].as_f64().unwrap() - 0.998987657129).abs() < 1e-8);
    assert_eq!(cas["tree"]["children"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        "{\n  \"scheme\": \"onoff\",\n  \"parms\": {}\n}",
    )
    .unwrap();
    let out = catsynth(dir.path(), &["generate", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parms") && err.contains("line 3"), "{err}");

    fs::write(
        dir.path().join("bad2.json"),
        r#"{"params": {"r": 0.3, "t": 1.5}}"#,
    )
    .unwrap();
    let out = catsynth(dir.path(), &["generate", "--config", "bad2.json"]);
    assert_eq!(out.status.code(), Some(2));

    let out = catsynth(dir.path(), &["generate", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vanishing_herald_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"scheme": "daokw", "params": {"r": 0.3, "t": 1.0}}"#,
    )
    .unwrap();
    let out = catsynth(dir.path(), &["generate", "--config", "c.json"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!dir.path().join("out/result.json").exists());
}
