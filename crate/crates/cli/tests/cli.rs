use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn z2lgt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_z2lgt")).args(args).output().unwrap()
}

fn body(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn scatter_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "mode = scatter\nL = 4\nm = 0.1\neps = 1.0\nT = 1.0\nxbar1 = 0.5\nxbar2 = 2.5\nkbar1 = 0\nkbar2 = 0\n").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = z2lgt(&["--config", cfg.to_str().unwrap(), "--seed", "11", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["density.csv", "energy.csv", "mesons.csv", "strings.csv", "entropy.csv", "manifest.json"] {
        assert!(!body(&a, f).is_empty());
        assert_eq!(body(&a, f), body(&b, f), "{f} differs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&body(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["config"]["seed"], 11);
    assert_eq!(manifest["config"]["sites"], 4);
}

#[test]
fn missing_key_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out = z2lgt(&["circuit", "--L", "4", "--m", "0.1", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing required key `eps`"), "{err}");
}

#[test]
fn circuit_report_lists_tabulated_and_measured_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = z2lgt(&["circuit", "--L", "4", "--m", "0.1", "--eps", "1.0", "--out", dir]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&body(tmp.path(), "resources.json")).unwrap();
    let r = &report["resources"];
    assert_eq!(r["tabulated_cnot_total"], 108);
    assert_eq!(r["blocks"]["v"]["cnots"], 24);
    assert_eq!(r["blocks"]["oa_first"]["cnots"], 12);
    assert_eq!(r["hadamard_test_cnots"], 2);
    let gates = String::from_utf8(body(tmp.path(), "gates.txt")).unwrap();
    assert_eq!(gates.lines().count() as u64, r["gates"].as_u64().unwrap());
    let f = report["simulation"]["fidelity_a_dag_dressed"].as_f64().unwrap();
    assert!(f > 1.0 - 1e-9, "{f}");
}

#[test]
fn check_mode_sets_the_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let ok = z2lgt(&["qse_bench", "--L", "6", "--m", "0.1", "--eps", "1.0", "--check", "--out", dir]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let csv = String::from_utf8(body(tmp.path(), "qse_bench.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k_int,c,E_QSE,E_exact,infidelity"));
    let strict = tmp.path().join("strict.cfg");
    fs::write(&strict, "mode = qse_bench\nL = 6\nm = 0.1\neps = 1.0\ntol_fidelity = 1.0000001\n").unwrap();
    let bad = z2lgt(&["--config", strict.to_str().unwrap(), "--check", "--out", dir]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invalid_values_are_reported_by_field() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let out = z2lgt(&["scatter", "--L", "5", "--m", "0.1", "--eps", "1", "--out", dir]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("L"));
    let out = z2lgt(&["nonsense", "--L", "4", "--m", "0.1", "--eps", "1", "--out", dir]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`mode`"));
}
