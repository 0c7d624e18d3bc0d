//! End-to-end runs of the `shapelab` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use shapelab::geometry::io::mesh_from_json;

fn shapelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapelab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const DISK: &str = r#"{"version": 1, "domain": {"kind": "planar", "rho0": 1.0}, "h": 0.1}"#;

#[test]
fn reference_prints_stamped_json() {
    let out = shapelab(&["reference", "--k", "2"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert!((v["mu2_ball"].as_f64().unwrap() - 3.38996).abs() < 1e-5);

    let out = shapelab(&["reference", "--r", "2", "--L", "6.283185307179586"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["case"], "Case2");

    let out = shapelab(&["reference", "--k", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_and_mesh_write_hashed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DISK);
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    let run = shapelab(&["solve", "--config", &cfg, "--out", o, "--quiet"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(run.stderr.is_empty());
    let eigen = read_json(&out_dir.join("eigen.json"));
    let hash = eigen["config_hash"].as_str().unwrap().to_owned();
    assert_eq!(eigen["multiplicity"], 2);
    assert!(eigen["relative_error"].as_f64().unwrap() < 0.01);
    assert!(std::fs::read_to_string(out_dir.join("modes.vtk")).unwrap().contains(&hash));
    assert!(std::fs::read_to_string(out_dir.join("stiffness.mtx")).unwrap().contains(&hash));
    assert_eq!(read_json(&out_dir.join("metadata.json"))["config_hash"], hash);

    let run = shapelab(&["mesh", "--config", &cfg, "--out", o, "--quiet"]);
    assert!(run.status.success());
    let mesh = mesh_from_json(&std::fs::read_to_string(out_dir.join("mesh.json")).unwrap()).unwrap();
    assert_eq!(read_json(&out_dir.join("mesh_summary.json"))["config_hash"], hash);
    assert_eq!(eigen["n_vertices"].as_u64().unwrap() as usize, mesh.n_vertices());
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"version": 1, "domain": {"kind": "planar", "rho0": 1.0}, "h": 0.1, "hh": 2}"#);
    let run = shapelab(&["solve", "--config", &cfg, "--quiet"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("hh"));

    let cfg = write_config(dir.path(), r#"{"version": 1, "domain": {"kind": "planar", "rho0": 1.0}, "h": 0.9}"#);
    assert_eq!(shapelab(&["solve", "--config", &cfg, "--quiet"]).status.code(), Some(1));
    assert_eq!(shapelab(&["solve", "--quiet"]).status.code(), Some(1));
}

#[test]
fn verify_reports_checks_and_exits_four_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "domain": {"kind": "straight_cylinder", "r": 2.0, "L": 6.283185307179586}, "h": 0.1,
            "field": {"kind": "normal", "speed": {"mean": 0.0, "cos": [1.0]}, "preserve": "per_component"}}"#,
    );
    let run = shapelab(&["verify", "--config", &cfg, "--out", o, "--quiet", "--check", "overdetermined,nodal,expansion,derivative"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let v = read_json(&out_dir.join("verify.json"));
    assert_eq!(v["all_passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);

    // A comparison cylinder of the wrong volume is a precondition failure.
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "domain": {"kind": "straight_cylinder", "r": 2.0, "L": 6.283185307179586}, "h": 0.1,
            "weinberger": {"r": 2.5}}"#,
    );
    let run = shapelab(&["verify", "--config", &cfg, "--out", o, "--quiet", "--check", "weinberger"]);
    assert_eq!(run.status.code(), Some(4));
}

#[test]
fn optimize_ledger_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"version": 1, "domain": {"kind": "planar", "rho0": 1.0, "cos": [0.0, 0.0, 0.1]}, "h": 0.1,
            "flow": {"h": 0.1, "max_steps": 3}}"#,
    );
    let mut ledgers = Vec::new();
    for name in ["a", "b"] {
        let o = dir.path().join(name);
        let run = shapelab(&["optimize", "--config", &cfg, "--out", o.to_str().unwrap(), "--quiet"]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        let path = String::from_utf8(run.stdout).unwrap();
        assert_eq!(Path::new(path.trim()), o.join("ledger.jsonl"));
        ledgers.push(std::fs::read(o.join("ledger.jsonl")).unwrap());
        let last: Value = serde_json::from_str(std::str::from_utf8(ledgers.last().unwrap()).unwrap().lines().last().unwrap()).unwrap();
        assert_eq!(last["config_hash"].as_str().unwrap().len(), 64);
        assert!(read_json(&o.join("final_spec.json"))["termination"].is_string());
    }
    assert_eq!(ledgers[0], ledgers[1]);
}
