use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use teleclone_core::mqc::equal_squeezing_db;

fn teleclone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teleclone"))
        .args(args)
        .env_remove("TELECLONE_TOL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn mqc_prints_budget_and_writes_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("state.json");
    let o = teleclone(&["mqc", "--M", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("7.66 dB").count(), 3, "{text}");
    let state = read_json(&out);
    assert_eq!(state["modes"], 3);
    let manifest = read_json(&dir.path().join("state.json.manifest.json"));
    assert_eq!(manifest["command"], "mqc");
    assert_eq!(manifest["parameters"]["M"], 2);
    assert!(manifest["timestamp"].as_str().unwrap().ends_with('Z'));
    assert_eq!(manifest["artifact_version"], teleclone_core::VERSION);
}

#[test]
fn mqc_off_symmetric_angle() {
    let o = teleclone(&["mqc", "--M", "2", "--theta0", "0.7"]);
    assert!(o.status.success());
    let line = stdout(&o).lines().find(|l| l.starts_with("r1 =")).unwrap().to_string();
    let vals: Vec<f64> = line
        .split(',')
        .map(|p| p.split('=').nth(1).unwrap().trim().parse().unwrap())
        .collect();
    assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!((vals[0] - vals[1]).abs() > 1e-3);
}

#[test]
fn mqc_rejects_bad_input() {
    let o = teleclone(&["mqc", "--M", "2", "--theta0", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lower bound"), "{}", stderr(&o));
    let o = teleclone(&["mqc", "--M", "2", "--theta0", "1.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("upper bound"), "{}", stderr(&o));
    let o = teleclone(&["mqc", "--M", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("M = 1"));
    let o = teleclone(&["mqc", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mqc_reads_spec_document() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"M": 4, "theta0": 0.7853981633974483, "s": 0.0}"#).unwrap();
    let o = teleclone(&["mqc", "--spec", spec.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("4.77 dB"));
}

#[test]
fn teleclone_analytic_fidelities() {
    for (m, f) in [("2", 2.0 / 3.0), ("5", 5.0 / 9.0)] {
        let o = teleclone(&["teleclone", "--M", m, "--method", "analytic"]);
        assert!(o.status.success());
        let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!((report["fidelity_per_clone"].as_f64().unwrap() - f).abs() < 1e-10);
        assert!(report["trials"].is_null());
    }
}

#[test]
fn teleclone_mc_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = teleclone(&[
            "teleclone", "--M", "2", "--method", "mc", "--trials", "100000", "--seed", "7", "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let m = read_json(&dir.path().join("a.json.manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["parameters"]["trials"], 100000);
}

#[test]
fn teleclone_from_state_file_and_epr_channel() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("s.json");
    assert!(teleclone(&["mqc", "--M", "3", "--out", state.to_str().unwrap()]).status.success());
    let o = teleclone(&["teleclone", "--state-file", state.to_str().unwrap()]);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((report["fidelity_per_clone"].as_f64().unwrap() - 0.6).abs() < 1e-10);

    let o = teleclone(&["teleclone", "--M", "2", "--epr-r", "3"]);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let f = report["fidelity_per_clone"].as_f64().unwrap();
    assert!(f < 2.0 / 3.0 && f > 0.99 * 2.0 / 3.0);
}

#[test]
fn teleclone_degenerate_port_exits_3() {
    let o = teleclone(&["teleclone", "--M", "2", "--u2", "0.7853981633974483,0,0,0"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical error"));
    let o = teleclone(&["teleclone", "--M", "2", "--u2", "0,0,0,0"]);
    assert!(o.status.success());
}

#[test]
fn teleclone_usage_errors() {
    assert_eq!(teleclone(&["teleclone"]).status.code(), Some(2));
    assert_eq!(teleclone(&["teleclone", "--M", "2", "--port", "7"]).status.code(), Some(2));
    assert_eq!(teleclone(&["teleclone", "--M", "2", "--method", "mc", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn sweep_over_receivers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = teleclone(&["sweep", "--m-range", "2:10", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("M,theta0,s,lambda_x,lambda_p,fidelity,optimal_fidelity,method"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 9);
    let mut prev = 1.0;
    for row in &rows {
        let m: usize = row[0].parse().unwrap();
        let f: f64 = row[5].parse().unwrap();
        assert!(f < prev && f > 0.5);
        prev = f;
        let db = equal_squeezing_db(m).unwrap();
        for col in [8, 9] {
            assert!((row[col].parse::<f64>().unwrap() - db).abs() < 1e-10);
        }
    }
    assert!(dir.path().join("m.csv.manifest.json").exists());
}

#[test]
fn sweep_other_parameters() {
    let o = teleclone(&["sweep", "-M", "3", "--theta0-range", "0.7:0.9:5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 5);
    for row in &rows {
        let (lx, lp): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
        assert!((lx - 1.0 / 3.0).abs() < 1e-9 && (lp - 1.0 / 3.0).abs() < 1e-9);
    }

    let o = teleclone(&["sweep", "-M", "2", "--s-range", "-0.5:0.5:3"]);
    for row in csv_rows(&stdout(&o)) {
        assert!((row[5].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-10);
    }

    let o = teleclone(&["sweep", "-M", "2", "--r-range", "0.5:3:6"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1][5].parse::<f64>().unwrap() > w[0][5].parse::<f64>().unwrap()));
    assert_eq!(rows[0][10], "0.5");
}

#[test]
fn sweep_mc_rows_are_deterministic() {
    let args = ["sweep", "--m-range", "2:3", "--method", "mc", "--trials", "2000", "--seed", "3"];
    let a = stdout(&teleclone(&args));
    assert_eq!(a, stdout(&teleclone(&args)));
    assert!(csv_rows(&a).iter().all(|r| r[7] == "mc"));
}

#[test]
fn sweep_rejects_empty_ranges() {
    assert_eq!(teleclone(&["sweep", "--m-range", "5:2"]).status.code(), Some(2));
    assert_eq!(teleclone(&["sweep", "--s-range", "0:1:0"]).status.code(), Some(2));
    assert_eq!(teleclone(&["sweep"]).status.code(), Some(2));
    assert_eq!(teleclone(&["sweep", "--m-range", "2:3", "--s-range", "0:1:2"]).status.code(), Some(2));
}

#[test]
fn optimize_applies_defaults_and_writes_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"population": 12, "generations": 5}"#).unwrap();
    let out = dir.path().join("run.json");
    let o = teleclone(&["optimize", "--M", "2", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("near-vacuum modes"));

    let manifest = read_json(&dir.path().join("run.json.manifest.json"));
    let echoed = &manifest["parameters"]["config"];
    assert_eq!(echoed["population"], 12);
    assert_eq!(echoed["tournament"], 3);
    assert_eq!(echoed["elitism"], 2);
    assert_eq!(echoed["sigma_decay"], 0.995);
    assert_eq!(echoed["penalty_weight"], 1e4);
    assert_eq!(echoed["seed"], 4);
    assert_eq!(manifest["seed"], 4);

    let result = read_json(&out);
    assert_eq!(result["M"], 2);
    assert!(result["analysis"]["sorted_db"].is_array());
    let history = fs::read_to_string(dir.path().join("run.history.csv")).unwrap();
    assert!(history.starts_with("generation,best_objective,best_total_db,residual\n"));
    assert_eq!(history.lines().count(), 1 + result["generations_run"].as_u64().unwrap() as usize + 1);
}

#[test]
fn optimize_seeded_with_recipe_is_feasible() {
    let o = teleclone(&["optimize", "--M", "3", "--seed-recipe", "--population", "8", "--generations", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("feasible: yes"), "{text}");
    assert!(text.contains("near-vacuum modes (< 0.1 dB): 2 of 4"), "{text}");
}

#[test]
fn optimize_rejects_bad_config() {
    assert_eq!(teleclone(&["optimize", "--M", "2", "--population", "1"]).status.code(), Some(2));
    assert_eq!(teleclone(&["optimize", "--M", "1"]).status.code(), Some(2));
    assert_eq!(teleclone(&["optimize", "--M", "2", "--config", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn verify_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let o = teleclone(&["verify", "--M", "2,3,4,5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(!text.contains("FAIL"));
    for needle in ["0.666666666666667", "0.555555555555556", "-7.6555", "-4.1798"] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let report = read_json(&out);
    assert_eq!(report["table"].as_array().unwrap().len(), 4);
    let manifest = read_json(&dir.path().join("verify.json.manifest.json"));
    assert!(manifest["parameters"]["tolerance_override"].is_null());
}

#[test]
fn verify_tolerance_override_causes_controlled_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.json");
    let o = Command::new(env!("CARGO_BIN_EXE_teleclone"))
        .args(["verify", "--M", "2", "--trials", "2000", "--out", out.to_str().unwrap()])
        .env("TELECLONE_TOL", "1e-20")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("TELECLONE_TOL"));
    assert!(stderr(&o).contains("symplectic identity (M=2)"), "{}", stderr(&o));
    let manifest = read_json(&dir.path().join("verify.json.manifest.json"));
    assert_eq!(manifest["parameters"]["tolerance_override"], 1e-20);
}

#[test]
fn random_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = teleclone(&["teleclone", "--M", "2", "--method", "mc", "--trials", "500", "--seed", "random", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let manifest = read_json(&dir.path().join("r.json.manifest.json"));
    let report = read_json(&out);
    assert_eq!(manifest["seed"], report["seed"]);
}
