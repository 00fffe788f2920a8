use std::path::Path;
use std::process::{Command, Output};

fn emapr(args: &[&str], output_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emapr"))
        .args(args)
        .env("EMAPR_OUTPUT_DIR", output_dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mesh_prints_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let o = emapr(&["mesh", "--problem", "gresho", "--n", "4"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cells,vertices,edges,h,shape_regularity");
    assert!(lines[1].starts_with("32,25,56,"), "{}", lines[1]);
}

#[test]
fn mesh_lists_convergence_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = emapr(&["mesh", "--problem", "potential_flow", "--levels", "2,4", "--all-levels"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn run_writes_time_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run", "--problem", "gresho", "--element", "br", "--alpha", "0", "--nu", "0", "--dt", "0.01", "--T", "0.03",
        "--form", "emapr", "--n", "4", "--record-every", "1", "--dat",
    ];
    let o = emapr(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("gresho_br_emapr_a0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("t,E,E_d,"));
    assert_eq!(lines.len(), 1 + 4);
    assert!(dir.path().join("gresho_br_emapr_a0.dat").exists());
}

#[test]
fn reruns_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["run", "--problem", "manufactured", "--n", "4", "--T", "0.05", "--dt", "0.01", "--record-every", "1"];
    assert!(emapr(&args, a.path()).status.success());
    assert!(emapr(&args, b.path()).status.success());
    let name = "manufactured_br_emapr_a0.csv";
    let first = std::fs::read(a.path().join(name)).unwrap();
    assert_eq!(first, std::fs::read(b.path().join(name)).unwrap());
}

#[test]
fn run_convergence_study_and_eoc() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--problem", "potential_flow", "--levels", "2,4", "--T", "0.004", "--record-every", "1"];
    let o = emapr(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = dir.path().join("potential_flow_br_emapr_a0_convergence.csv");
    assert!(table.exists());
    let o = emapr(&["eoc", "--input", table.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().next().unwrap().contains("err_L2_u"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# Gresho smoke run\nproblem = gresho\nn = 4\ndt = 0.01\nT = 0.02\nform = classical\n").unwrap();
    let o = emapr(&["run", "--config", cfg.to_str().unwrap(), "--form", "skew"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("gresho_br_skew_a0.csv").exists());
    assert!(!dir.path().join("gresho_br_classical_a0.csv").exists());
}

#[test]
fn compare_writes_one_csv_per_form() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["compare", "--forms", "emapr,emac,classical", "--problem", "gresho", "--n", "4", "--T", "0.02"];
    let o = emapr(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for form in ["emapr", "emac", "classical"] {
        assert!(dir.path().join(format!("gresho_br_{form}_a0.csv")).exists(), "{form}");
    }
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["run", "--n", "4"],
        &["run", "--problem", "vortex_street"],
        &["run", "--problem", "gresho", "--dt=-1"],
        &["run", "--problem", "gresho", "--set", "colour=blue"],
        &["compare", "--forms", "emapr,upwind", "--problem", "gresho"],
    ];
    for args in cases {
        let o = emapr(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("emapr:"), "{args:?}");
    }
    let o = emapr(&["run", "--problem", "gresho", "--bogus"], dir.path());
    assert!(!o.status.success());
    let o = emapr(&["eoc", "--input", "/nonexistent/errs.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
