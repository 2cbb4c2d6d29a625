//! Configuration grammar, scenario dispatch and output files.

use std::fs;
use std::path::Path;

use surfflow::cli_io::{
    coefficient_table, parse_config_str, read_snapshot_binary, run_scenario, write_snapshot_binary, NormalSpec,
    RunOptions, ScenarioKind, SnapshotHeader, StepSize,
};
use surfflow::kinetic_solvers::XBoundary;
use surfflow::Error;

fn violations(text: &str) -> Vec<String> {
    match parse_config_str(text) {
        Err(Error::Validation(v)) => v,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out_dir: Some(dir.to_path_buf()),
        snapshot_every: None,
    }
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,N,Phi"));
    lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

const TRAPPED: &str = r#"
kind = "trapped-kinetic"

[potential.normal]
profile = "wall"
w_m = 4.0
z_m = 0.5

[grid]
nx = 16
nv = 8
ne = 8
t_final = 0.01

[physics]
epsilon = 0.5
initial_amplitude = 0.5
initial_width = 0.2
"#;

#[test]
fn minimal_trapped_config_gets_defaults() {
    let cfg = parse_config_str("kind = \"trapped-kinetic\"\n[potential.normal]\nw_m = 4.0\n").unwrap();
    assert_eq!(cfg.kind, ScenarioKind::TrappedKinetic);
    assert_eq!(cfg.grid.v_max, 6.0);
    assert_eq!(cfg.grid.boundary, XBoundary::Periodic);
    assert_eq!(cfg.grid.dt, StepSize::Auto);
    assert_eq!(cfg.normal, Some(NormalSpec::Wall { w_m: 4.0, z_m: 0.5 }));
    assert_eq!(cfg.physics.tau_ms, 1.0);
    assert!(cfg.units.is_none());
}

#[test]
fn missing_normal_section_is_named() {
    let v = violations("kind = \"channel\"\n");
    assert!(v.iter().any(|m| m.contains("[potential.normal]")), "{v:?}");
}

#[test]
fn zero_epsilon_is_rejected() {
    let v = violations("kind = \"diffusion-iso\"\n[physics]\nepsilon = 0\n");
    assert_eq!(v, vec!["physics.epsilon must be in (0,1], got 0".to_string()]);
    assert!(v[0].contains("epsilon must be in (0,1]"));
}

#[test]
fn every_violation_is_reported_at_once() {
    let v = violations(
        "kind = \"mesoscopic\"\n[potential.normal]\nw_m = -1\n[grid]\nnx = 0\nboundary = \"open\"\nmystery = 3\n",
    );
    for needle in [
        "potential.normal.w_m",
        "[potential.tangential]",
        "grid.nx",
        "grid.boundary",
        "unknown key grid.mystery",
    ] {
        assert!(v.iter().any(|m| m.contains(needle)), "{needle} missing from {v:?}");
    }
    assert_eq!(v.len(), 5);
}

#[test]
fn unknown_kind_lists_the_choices() {
    let v = violations("kind = \"plasma\"\n");
    assert!(v[0].contains("trapped-kinetic") && v[0].contains("study-coupling"));
    assert_eq!(violations("[grid]\nnx = 4\n"), vec!["missing key kind".to_string()]);
}

#[test]
fn syntax_errors_carry_the_line() {
    match parse_config_str("kind = \"coeffs\"\n\n[grid]\nnx = = 3\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn physical_units_set_the_relaxation_time() {
    // Argon at 300 K: v* = sqrt(2 k T / m), tau = tau_s v* / L.
    let cfg = parse_config_str(
        "kind = \"diffusion-iso\"\n[units]\ntemperature_k = 300\nmass_kg = 6.6335209e-26\nlength_m = 1e-9\ntau_ms_s = 1e-12\n",
    )
    .unwrap();
    let vstar = (2.0 * 1.380649e-23 * 300.0 / 6.6335209e-26_f64).sqrt();
    assert!((cfg.physics.tau_ms - 1e-12 * vstar / 1e-9).abs() < 1e-12);
    assert!((cfg.physics.tau_ms - 0.35338).abs() < 1e-4);
    let v = violations("kind = \"diffusion-iso\"\n[units]\ntemperature_k = 300\n");
    assert_eq!(v.len(), 3, "{v:?}");
}

#[test]
fn studies_require_the_wall_profile() {
    let v = violations("kind = \"study-coupling\"\n[potential.normal]\nprofile = \"parabolic\"\nw_m = 4\n");
    assert!(v[0].contains("potential.normal.profile"), "{v:?}");
}

#[test]
fn flat_layer_coefficient_table() {
    let cfg = parse_config_str("kind = \"coeffs\"\n[potential.normal]\nprofile = \"flat\"\n[physics]\ntau_ms = 2.0\n").unwrap();
    let table = coefficient_table(&cfg).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("W_m,U_m,tau_ms,gamma,D0n,D0T@T1N1,C0p,C0T,c"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row.len(), 9);
    assert!((row[4] - 1.0).abs() < 1e-10, "D0n = {}", row[4]);
    assert_eq!(row[8], 0.0);
}

#[test]
fn coefficient_sweep_has_one_row_per_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(
        "kind = \"coeffs\"\n[potential.normal]\nw_m = 1\n[sweep]\nvalues = [1, 2, 4]\n",
    )
    .unwrap();
    let s = run_scenario(&cfg, &opts(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
    let c: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(8).unwrap().parse().unwrap())
        .collect();
    assert_eq!(c.len(), 3);
    assert!(c[0] > c[1] && c[1] > c[2] && c[2] > 0.0);
    assert!(s.mass.is_none());
}

#[test]
fn first_snapshot_reproduces_the_initial_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(TRAPPED).unwrap();
    let s = run_scenario(&cfg, &opts(dir.path())).unwrap();
    assert!(s.steps > 0);
    assert!(s.mass_drift().unwrap().abs() < 1e-12);
    assert!(s.line().contains("mass drift"));
    let rows = read_rows(&dir.path().join("density.csv"));
    let first: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == 0.0).collect();
    assert_eq!(first.len(), 16);
    for r in first {
        let n0 = 1.0 + 0.5 * (-(r[1] - 0.5) * (r[1] - 0.5) / (2.0 * 0.2 * 0.2)).exp();
        assert!((r[2] - n0).abs() < 1e-14 * n0, "{} vs {n0}", r[2]);
    }
    let last_t = rows.last().unwrap()[0];
    assert!((last_t - 0.01).abs() < 1e-15);
}

#[test]
fn binary_dump_matches_grid_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config_str(TRAPPED).unwrap();
    cfg.output.binary = true;
    let o = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        snapshot_every: Some(1),
    };
    let s = run_scenario(&cfg, &o).unwrap();
    let dumps: Vec<_> = s.files.iter().filter(|p| p.extension().is_some_and(|e| e == "bin")).collect();
    assert_eq!(dumps.len(), s.steps + 1);
    let (h, values) = read_snapshot_binary(dumps[0]).unwrap();
    assert_eq!((h.nx, h.nv, h.ne, h.index), (16, 8, 8, 0));
    assert_eq!(values.len(), 16 * 8 * 8);

    let path = dir.path().join("copy.bin");
    write_snapshot_binary(&path, h, &values).unwrap();
    let (h2, v2) = read_snapshot_binary(&path).unwrap();
    assert_eq!(h, h2);
    assert!(values.iter().zip(&v2).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(fs::metadata(&path).unwrap().len(), 32 + 8 * 16 * 8 * 8);
}

#[test]
fn binary_writer_checks_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let h = SnapshotHeader {
        nx: 2,
        nv: 1,
        ne: 1,
        index: 7,
    };
    assert!(write_snapshot_binary(&dir.path().join("x.bin"), h, &[1.0]).is_err());
    fs::write(dir.path().join("short.bin"), [0u8; 12]).unwrap();
    assert!(matches!(read_snapshot_binary(&dir.path().join("short.bin")), Err(Error::Io { .. })));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(TRAPPED).unwrap();
    let sa = run_scenario(&cfg, &opts(a.path())).unwrap();
    let sb = run_scenario(&cfg, &opts(b.path())).unwrap();
    assert_eq!(sa.line(), sb.line());
    for (pa, pb) in sa.files.iter().zip(&sb.files) {
        assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap(), "{}", pa.display());
    }
}

fn run_text(text: &str) -> (surfflow::cli_io::RunSummary, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(text).unwrap();
    let s = run_scenario(&cfg, &opts(dir.path())).unwrap();
    (s, dir)
}

#[test]
fn every_time_dependent_kind_runs() {
    let normal = "[potential.normal]\nw_m = 4\n";
    let tangential = "[potential.tangential]\nprofile = \"harmonic\"\nu_m = 1\ndelta = 0.25\n";
    let grid = "[grid]\nnx = 64\nnv = 8\nne = 8\nnex = 8\nt_final = 0.005\n";
    let cases = [
        ("two-group", "[physics]\nepsilon = 0.5\nambient = \"maxwellian\"\nambient_density = 1.2\n", false),
        ("channel", "[physics]\nepsilon = 0.5\nregime = \"weak\"\n", true),
        ("mesoscopic", tangential, true),
        ("fine-tangential", tangential, true),
        ("diffusion-iso", "[physics]\nforce_amplitude = 0.3\n", true),
        ("diffusion-noniso", "[physics]\ntemperature_amplitude = 0.2\n", true),
        ("coupled-diffusion", "[physics]\nregime = \"moderate\"\n", true),
    ];
    for (kind, extra, conserves) in cases {
        let (s, dir) = run_text(&format!("kind = \"{kind}\"\n{normal}{grid}{extra}"));
        assert!(s.steps > 0, "{kind}");
        if conserves {
            assert!(s.mass_drift().unwrap().abs() < 1e-11, "{kind}: {}", s.line());
        }
        let csv = if kind.contains("channel") || kind.starts_with("coupled") { "layer1.csv" } else { "density.csv" };
        let rows = read_rows(&dir.path().join(csv));
        assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite())), "{kind}");
    }
}

#[test]
fn fixed_step_is_fitted_to_the_final_time() {
    let (s, _d) = run_text("kind = \"diffusion-iso\"\n[grid]\nnx = 8\ndt = 0.003\nt_final = 0.01\n");
    assert_eq!(s.steps, 4);
    assert!((s.dt - 0.0025).abs() < 1e-16);
}

#[test]
fn diffusion_limit_study_writes_a_report() {
    let (s, dir) = run_text(
        "kind = \"study-diffusion-limit\"\n[potential.normal]\nw_m = 4\n[grid]\nx_min = -1\nlength = 2\nnx = 16\nnv = 8\nne = 8\nt_final = 0.05\n[physics]\ninitial_width = 0.25\n[sweep]\nvalues = [0.2, 0.1, 0.05]\n",
    );
    let text = fs::read_to_string(dir.path().join("diffusion_limit.csv")).unwrap();
    assert!(text.starts_with("epsilon,L1,Linf,order\n"));
    assert_eq!(text.lines().count(), 4);
    assert!(s.passed.is_some());
    assert!(s.report.unwrap().contains("epsilon"));
}
