use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const SHIPPED: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/scenarios/paper_scenario.json");

fn servicing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_servicing")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn shipped() -> Value {
    serde_json::from_str(&fs::read_to_string(SHIPPED).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

/// Short run of a scenario that completes: full sensing and the defunct
/// spacecraft away from the frame origin.
fn completing(dir: &Path) -> PathBuf {
    let mut cfg = shipped();
    cfg["sensing"]["outputs"] = json!(vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]; 6]);
    cfg["target"]["initial"] = json!([1000.0, 0.0, 0.0]);
    cfg["integrator"]["duration"] = json!(70.0);
    write_config(dir, "completing.json", &cfg)
}

#[test]
fn completed_run_writes_three_files_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = completing(dir.path());
    let out = dir.path().join("run");
    let o = servicing(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "42", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["trajectory.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_hash"], summary["config_hash"]);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash={hash}"));

    let o = servicing(&["export-plots", "--run", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let header = |f: &str| {
        let text = fs::read_to_string(out.join(f)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("# config_hash={hash}"));
        lines.next().unwrap().to_string()
    };
    assert_eq!(header("fig2_traj.csv"), "t,agent,x,y,z");
    assert_eq!(header("fig3_zeta.csv"), "t,zeta_tilde_norm_1,zeta_tilde_norm_2,zeta_tilde_norm_3,zeta_tilde_norm_4,zeta_tilde_norm_5,zeta_tilde_norm_6");
    assert_eq!(header("fig4_e.csv"), "t,e_norm_1,e_norm_2,e_norm_3,e_norm_4,e_norm_5,e_norm_6");
    let traj = fs::read_to_string(out.join("fig2_traj.csv")).unwrap();
    let last_t: f64 = traj.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(last_t <= 60.0);

    // Same manifest inputs reproduce byte-identical CSVs.
    let again = dir.path().join("again");
    let o = servicing(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "42", "--out", again.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("trajectory.csv")).unwrap(), fs::read(again.join("trajectory.csv")).unwrap());
}

#[test]
fn shipped_scenario_aborts_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = servicing(&["simulate", "--config", SHIPPED, "--seed", "42", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("aborted at t ="), "{}", stderr(&o));
    for f in ["trajectory.csv", "summary.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn missing_gains_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped();
    cfg.as_object_mut().unwrap().remove("gains");
    let path = write_config(dir.path(), "bad.json", &cfg);
    let out = dir.path().join("run");
    let o = servicing(&["simulate", "--config", path.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gains"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("run");
    let o = servicing(&["simulate", "--config", SHIPPED, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = servicing(&["trackability", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn seed_sweep_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = completing(dir.path());
    let out = dir.path().join("sweep");
    let o = servicing(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--seeds", "3..5", "--out", out.to_str().unwrap(), "--duration", "61",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for s in [3, 4] {
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("seed_{s}/manifest.json"))).unwrap()).unwrap();
        assert_eq!(manifest["seed"], s);
    }
    assert!(!out.join("seed_5").exists());
}

#[test]
fn trackability_reports() {
    let o = servicing(&["trackability", "--config", SHIPPED, "--json"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["rank"], 3);
    assert_eq!(r["trackable"], true);

    let dir = tempfile::tempdir().unwrap();
    let mut blind = shipped();
    blind["sensing"]["flags"] = json!(vec![false; 6]);
    let p = write_config(dir.path(), "blind.json", &blind);
    let r: Value = serde_json::from_str(&stdout(&servicing(&["trackability", "--config", p.to_str().unwrap(), "--json"]))).unwrap();
    assert_eq!(r["rank"], 0);
    assert_eq!(r["trackable"], false);

    let mut single = shipped();
    single["sensing"]["outputs"] = json!(vec![[[1.0, 0.0, 0.0]]; 6]);
    let p = write_config(dir.path(), "single.json", &single);
    let o = servicing(&["trackability", "--config", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("rank       1"));
    assert!(stdout(&o).contains("not trackable"));
}

#[test]
fn gains_with_pinned_and_estimated_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let bounds = dir.path().join("bounds.json");
    fs::write(
        &bounds,
        r#"{"lipschitz": 0, "l_phi": 0, "d_bound": 0, "omega_bar": 0, "omega_dot_bar": 0,
            "q0_bar": 0, "q0_dot_bar": 0, "eps_bar": 0, "m_bound": 0, "chi": 100}"#,
    )
    .unwrap();
    let o = servicing(&["gains", "--config", SHIPPED, "--bounds", bounds.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.lines().any(|l| l.starts_with("alpha1") && l.contains("2.000000e0")));
    assert!(table.lines().any(|l| l.starts_with("alpha3") && l.contains("2.000000e0")));
    assert!(table.contains("caveat              false"));

    let o = servicing(&["gains", "--config", SHIPPED, "--json"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["caveat"], true);
    assert_eq!(r["provenance"]["lipschitz_samples"], 10_000);

    let mut bad = shipped();
    bad["gains"]["gamma"] = json!(vec![-1.0; 103]);
    let p = write_config(dir.path(), "bad_gamma.json", &bad);
    assert_eq!(code(&servicing(&["gains", "--config", p.to_str().unwrap()])), 2);
}

#[test]
fn export_rejects_missing_and_truncated_logs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&servicing(&["export-plots", "--run", dir.path().to_str().unwrap()])), 1);

    let cfg = completing(dir.path());
    let out = dir.path().join("run");
    let o = servicing(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap(), "--duration", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv_path = out.join("trajectory.csv");
    let text = fs::read_to_string(&csv_path).unwrap();
    let kept: Vec<&str> = text.lines().take(text.lines().count() - 3).collect();
    fs::write(&csv_path, kept.join("\n") + "\n").unwrap();
    let o = servicing(&["export-plots", "--run", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rows"), "{}", stderr(&o));
}
