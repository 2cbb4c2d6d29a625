//! End-to-end runs of the `surfflow` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn surfflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const DIFFUSION: &str = "kind = \"diffusion-iso\"\n[grid]\nnx = 32\nt_final = 0.01\n[physics]\nforce_amplitude = 0.2\n";

#[test]
fn validate_accepts_a_good_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", DIFFUSION);
    let out = surfflow(&["validate", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid diffusion-iso configuration"));
}

#[test]
fn validate_lists_every_violation_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "kind = \"channel\"\n[physics]\nepsilon = 0\n");
    let out = surfflow(&["validate", &cfg]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epsilon must be in (0,1]"), "{err}");
    assert!(err.contains("[potential.normal]"), "{err}");
}

#[test]
fn syntax_error_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "kind = \"coeffs\"\n[grid\n");
    let out = surfflow(&["validate", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_file_is_an_error() {
    let out = surfflow(&["run", "/nonexistent/surfflow.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/surfflow.toml"));
}

#[test]
fn run_writes_snapshots_and_prints_the_mass_drift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", DIFFUSION);
    let out_dir = dir.path().join("out");
    let out = surfflow(&[
        "--threads",
        "2",
        "run",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--snapshot-every",
        "5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mass drift"), "{stdout}");
    let csv = fs::read_to_string(out_dir.join("density.csv")).unwrap();
    assert!(csv.starts_with("t,x,N,Phi\n"));
    let times: std::collections::BTreeSet<String> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert!(times.len() > 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", DIFFUSION);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(surfflow(&["run", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    assert_eq!(fs::read(a.join("density.csv")).unwrap(), fs::read(b.join("density.csv")).unwrap());
}

#[test]
fn coeffs_on_the_flat_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "kind = \"trapped-kinetic\"\n[potential.normal]\nprofile = \"flat\"\n[physics]\ntau_ms = 3.0\n",
    );
    let out_dir = dir.path().join("c");
    let out = surfflow(&["coeffs", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("coefficients.csv")).unwrap();
    let d0n: f64 = text.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((d0n - 1.5).abs() < 1e-10);
}

#[test]
fn study_checks_the_sections_it_needs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", DIFFUSION);
    let out = surfflow(&["study", "homogenization", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[potential.tangential]"));
}

#[test]
fn coupling_study_writes_one_file_per_regime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "kind = \"channel\"\n[potential.normal]\nw_m = 4\n[grid]\nnx = 2\nnv = 8\nne = 12\nt_final = 0.05\n[physics]\nepsilon = 0.05\n[sweep]\nregimes = [\"moderate\", \"weak\"]\n",
    );
    let out_dir = dir.path().join("s");
    let out = surfflow(&["study", "coupling", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("coupling_moderate.csv").exists());
    assert!(out_dir.join("coupling_weak.csv").exists());
    assert!(!out_dir.join("coupling_strong.csv").exists());
    assert_eq!(fs::read_to_string(out_dir.join("coupling.csv")).unwrap().lines().count(), 3);
}
