use std::path::Path;
use std::process::{Command, Output};

use qrelax::goe::{sample_goe, GoeParams};
use qrelax::io::matrix_file::write_dense;
use qrelax::HermitianOperator;

fn qrelax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrelax")).args(args).output().expect("binary runs")
}

fn csv_columns(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().expect("header").split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, v) in line.split(',').enumerate() {
            cols[c].push(v.parse().expect("number"));
        }
    }
    (header, cols)
}

fn column<'a>(header: &[String], cols: &'a [Vec<f64>], name: &str) -> &'a [f64] {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"));
    &cols[i]
}

#[test]
fn goe_run_writes_series_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("goe.csv");
    let o = qrelax(&["goe", "--dim", "80", "--tau-max", "2", "--tau-steps", "21", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, cols) = csv_columns(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(header[0], "tau");
    for name in ["survival", "Q", "dQ2", "P", "P2", "NPC", "survival_analytic", "NPC_analytic"] {
        assert_eq!(column(&header, &cols, name).len(), 21);
    }
    assert!((column(&header, &cols, "survival")[0] - 1.0).abs() < 1e-12);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("goe.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["mode"], "goe");
    assert_eq!(meta["dimension"], 80);
}

#[test]
fn stdout_output_without_out_flag() {
    let o = qrelax(&["oscillator", "--tau-max", "1", "--tau-steps", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("tau,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn oscillator_matches_closed_form() {
    let o = qrelax(&["oscillator", "--alpha", "1", "--omega", "1", "--n-max", "40", "--tau-max", "12.566", "--tau-steps", "101"]);
    assert!(o.status.success());
    let (header, cols) = csv_columns(&String::from_utf8(o.stdout).unwrap());
    for name in ["survival", "Q", "P", "dQ2", "dP2"] {
        let num = column(&header, &cols, name);
        let exact = column(&header, &cols, &format!("{name}_analytic"));
        let err = num.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{name}: {err}");
    }
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = qrelax(&["goe", "--dim", "50", "--tau-steps", "11", "--deterministic", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        (std::fs::read(&out).unwrap(), std::fs::read(dir.path().join(format!("{name}.meta.json"))).unwrap())
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# small run\ndim = 40\ntau-steps = 5\ntau-max = 1\n").unwrap();
    let o = qrelax(&["goe", "--config", cfg.to_str().unwrap(), "--tau-steps", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 8);
}

#[test]
fn external_without_hamiltonian_exits_2() {
    let o = qrelax(&["external"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hamiltonian-file"));
}

#[test]
fn bad_value_exits_2() {
    assert_eq!(qrelax(&["goe", "--dim", "many"]).status.code(), Some(2));
    assert_eq!(qrelax(&["goe", "--tol", "nonsense=1"]).status.code(), Some(2));
}

fn write_goe(path: &Path, dim: usize) {
    let h = sample_goe(&GoeParams::new(dim, 1.0, 7).unwrap()).unwrap();
    write_dense(path, &h, true).unwrap();
}

#[test]
fn mismatched_observable_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.bin");
    let q = dir.path().join("q.bin");
    write_goe(&h, 20);
    write_dense(&q, &HermitianOperator::from_diagonal(&[1.0; 10], "computational"), true).unwrap();
    let o = qrelax(&["external", "--hamiltonian-file", h.to_str().unwrap(), "--observable-file", q.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn corrupt_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.bin");
    std::fs::write(&h, b"not a matrix").unwrap();
    let o = qrelax(&["external", "--hamiltonian-file", h.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn external_run_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.bin");
    write_goe(&h, 300);
    let out = dir.path().join("ext.csv");
    let o = qrelax(&[
        "external",
        "--hamiltonian-file",
        h.to_str().unwrap(),
        "--snapshot-tau",
        "2",
        "--tau-steps",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for tag in ["strength_a0_tau2", "hist_real_a0_tau2", "hist_imag_a0_tau2", "widths"] {
        assert!(dir.path().join(format!("ext.{tag}.csv")).exists(), "{tag}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ext.csv.meta.json")).unwrap()).unwrap();
    assert!(meta["scalars"]["width_identity_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn boson_export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let exported = dir.path().join("h.bin");
    let o = qrelax(&[
        "boson",
        "--n-bosons",
        "3",
        "--n-levels",
        "4",
        "--tau-steps",
        "5",
        "--export-hamiltonian",
        exported.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h = qrelax::io::ingest_matrix(&exported, 1e-12, 1000).unwrap();
    assert_eq!(h.dim(), 20);
}
