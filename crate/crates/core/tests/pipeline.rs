use faer::Mat;
use num_complex::Complex64;

use qrelax::goe::{sample_goe, GoeParams};
use qrelax::io::matrix_file::{write_coordinate, write_dense};
use qrelax::io::run::{external_inputs, observable_eigenbasis};
use qrelax::io::{run, InitialSelector, Mode, RunConfig};
use qrelax::spectral::{diagonalize, evolve};
use qrelax::{HermitianOperator, WavePacket, COMPUTATIONAL_BASIS};

fn external_config(dir: &std::path::Path, h: &HermitianOperator, q: Option<&HermitianOperator>) -> RunConfig {
    let h_path = dir.join("h.qrxm");
    write_dense(&h_path, h, true).unwrap();
    let mut c = RunConfig::new(Mode::External);
    c.hamiltonian_file = Some(h_path);
    if let Some(q) = q {
        let q_path = dir.join("q.qrxm");
        write_dense(&q_path, q, false).unwrap();
        c.observable_file = Some(q_path);
    }
    c.tau_max = 4.0;
    c.tau_steps = 41;
    c.snapshot_taus.clear();
    c.deterministic = true;
    c
}

#[test]
fn diagonal_observable_gives_identity_rotation() {
    let values: Vec<f64> = (0..30).map(|k| k as f64 * 0.25 - 3.0).collect();
    let q = HermitianOperator::from_diagonal(&values, COMPUTATIONAL_BASIS);
    let (u, spectrum) = observable_eigenbasis(&q, &RunConfig::new(Mode::External)).unwrap();
    for i in 0..30 {
        for j in 0..30 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((u[(i, j)] - expect).abs() < 1e-10);
        }
        assert!((spectrum.values()[i] - values[i]).abs() < 1e-10);
    }
}

#[test]
fn rotated_run_matches_direct_evolution() {
    let dir = tempfile::tempdir().unwrap();
    let n = 40;
    let h = sample_goe(&GoeParams::new(n, 1.0, 3).unwrap()).unwrap();
    let q = sample_goe(&GoeParams::new(n, 1.0, 4).unwrap()).unwrap();
    let mut config = external_config(dir.path(), &h, Some(&q));
    config.initial = vec![InitialSelector::Index(7)];
    let out = run(&config).unwrap();

    // The initial state is the 8th eigenvector of Q, evolved in the original basis.
    let q_spec = diagonalize(&q).unwrap();
    let h_spec = diagonalize(&h).unwrap();
    let v: Vec<Complex64> = (0..n).map(|a| Complex64::new(q_spec.vectors()[(a, 7)], 0.0)).collect();
    let psi0 = WavePacket::new(COMPUTATIONAL_BASIS, v, 1e-10).unwrap();
    let lambda = out.metadata.lambda;
    for (k, &tau) in out.series.grid().iter().enumerate() {
        let psi = evolve(&h_spec, &psi0, tau / lambda).unwrap();
        let survival = psi0.overlap(&psi).unwrap().norm_sqr();
        assert!((out.series.channel("survival").unwrap()[k] - survival).abs() < 1e-10, "tau={tau}");
        let amps = psi.amplitudes();
        let qpsi: Vec<f64> = (0..n).map(|a| (0..n).map(|b| q.get(a, b) * amps[b].re).sum()).collect();
        let qpsi_im: Vec<f64> = (0..n).map(|a| (0..n).map(|b| q.get(a, b) * amps[b].im).sum()).collect();
        let expect_q: f64 = (0..n).map(|a| amps[a].re * qpsi[a] + amps[a].im * qpsi_im[a]).sum();
        assert!((out.series.channel("Q").unwrap()[k] - expect_q).abs() < 1e-10, "tau={tau}");
    }
}

#[test]
fn coordinate_hamiltonian_runs() {
    let dir = tempfile::tempdir().unwrap();
    let n = 150;
    let mut entries = Vec::new();
    for i in 0..n {
        entries.push((i, i, i as f64 / n as f64));
        if i + 1 < n {
            entries.push((i, i + 1, 0.3));
        }
    }
    let path = dir.path().join("band.qrxm");
    write_coordinate(&path, n, &entries, true).unwrap();
    let mut c = RunConfig::new(Mode::External);
    c.hamiltonian_file = Some(path);
    c.snapshot_taus = vec![1.0];
    c.tau_steps = 11;
    let out = run(&c).unwrap();
    assert!(out.series.channel("survival").is_some());
    assert!(out.companions.iter().any(|c| c.tag.starts_with("strength_")));
    assert!(out.companions.iter().any(|c| c.tag == "widths"));
    let (h, _) = external_inputs(&c).unwrap();
    assert_eq!(h.basis(), "observable");
    assert_eq!(h.get(3, 4), 0.3);
}

#[test]
fn asymmetric_file_is_symmetrized() {
    let dir = tempfile::tempdir().unwrap();
    let m = Mat::from_fn(20, 20, |i, j| if i == j { i as f64 } else if i < j { 0.1 } else { 0.3 });
    let raw = HermitianOperator::symmetrized(m.clone(), COMPUTATIONAL_BASIS).unwrap();
    let path = dir.path().join("asym.qrxm");
    // Non-symmetric dense layout keeps both triangles as written.
    std::fs::write(&path, {
        let mut bytes = qrelax::io::MatrixHeader { kind: qrelax::io::MatrixKind::Dense, symmetric: false, dim: 20 }
            .to_bytes()
            .to_vec();
        for i in 0..20 {
            for j in 0..20 {
                bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
        bytes
    })
    .unwrap();
    let h = qrelax::io::ingest_matrix(&path, 1e-12, 100).unwrap();
    assert_eq!(h.row_major(), raw.row_major());
    assert!((h.get(0, 1) - 0.2).abs() < 1e-15);
}

#[test]
fn small_boson_run() {
    let mut c = RunConfig::new(Mode::Boson);
    c.n_bosons = 3;
    c.n_levels = 5;
    c.tau_steps = 21;
    c.initial = vec![InitialSelector::Index(0), InitialSelector::NearestQ(0.0)];
    let out = run(&c).unwrap();
    assert_eq!(out.metadata.dimension, 35);
    assert_eq!(out.metadata.lambda_a.len(), 2);
    assert!(out.series.channel("survival_a0").is_some());
    assert!(out.series.channel("abs_F2").is_some());
    assert_eq!(out.series.channel("abs_F2").unwrap()[0], 1.0);
}
