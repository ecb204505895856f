use faer::Mat;
use num_complex::Complex64;
use proptest::prelude::*;

use qrelax::io::matrix_file::{decode, encode_coordinate, encode_dense, MatrixKind};
use qrelax::observables::{amplitude_decomposition, strength_function, ObservableSpectrum};
use qrelax::spectral::{
    diagonal_variance, diagonalize, evolve, propagator_column, spectral_width, state_widths, trace_form_factor,
};
use qrelax::{HermitianOperator, WavePacket, COMPUTATIONAL_BASIS};

fn symmetric(dim: usize, values: &[f64]) -> HermitianOperator {
    let mut m = Mat::<f64>::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            m[(i, j)] = values[k];
            m[(j, i)] = values[k];
            k += 1;
        }
    }
    HermitianOperator::new(m, COMPUTATIONAL_BASIS, 0.0).unwrap()
}

fn hamiltonian() -> impl Strategy<Value = HermitianOperator> {
    (2usize..=24).prop_flat_map(|dim| {
        proptest::collection::vec(-3.0f64..3.0, dim * (dim + 1) / 2).prop_map(move |v| symmetric(dim, &v))
    })
}

fn packet(dim: usize, seed: &[f64]) -> WavePacket {
    let amps = (0..dim).map(|i| Complex64::new(seed[i % seed.len()] + i as f64 * 0.1, (i as f64).sin())).collect();
    WavePacket::normalized(COMPUTATIONAL_BASIS, amps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evolution_is_unitary(h in hamiltonian(), t in 0.0f64..20.0, pick in 0usize..1000) {
        let spec = diagonalize(&h).unwrap();
        let a0 = pick % h.dim();
        let col = propagator_column(&spec, a0, t).unwrap();
        prop_assert!((col.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!((amplitude_decomposition(&col).total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overlaps_are_conserved(h in hamiltonian(), t in 0.0f64..20.0, s in proptest::collection::vec(-1.0f64..1.0, 1..8)) {
        let spec = diagonalize(&h).unwrap();
        let psi = packet(h.dim(), &s);
        let phi = packet(h.dim(), &[0.3, -0.7]);
        let before = psi.overlap(&phi).unwrap();
        let after = evolve(&spec, &psi, t).unwrap().overlap(&evolve(&spec, &phi, t).unwrap()).unwrap();
        prop_assert!((after - before).norm() < 1e-10);
    }

    #[test]
    fn width_identity(h in hamiltonian()) {
        let lambda = spectral_width(&h);
        let w = state_widths(&h);
        let mean_sq = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        prop_assert!((mean_sq - (lambda * lambda - diagonal_variance(&h))).abs() < 1e-10 * (lambda * lambda).max(1.0));
    }

    #[test]
    fn propagator_symmetries(h in hamiltonian(), t in -10.0f64..10.0) {
        let spec = diagonalize(&h).unwrap();
        let n = h.dim();
        let cols: Vec<_> = (0..n).map(|a| propagator_column(&spec, a, t).unwrap()).collect();
        let back: Vec<_> = (0..n).map(|a| propagator_column(&spec, a, -t).unwrap()).collect();
        for a in 0..n {
            for b in 0..n {
                prop_assert!((cols[b].entries[a] - back[a].entries[b].conj()).norm() < 1e-10);
                prop_assert!((cols[b].entries[a] - cols[a].entries[b]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn strength_function_mass(h in hamiltonian(), t in 0.0f64..10.0, bins in 1usize..30) {
        let spec = diagonalize(&h).unwrap();
        let q = ObservableSpectrum::uniform_traceless(h.dim(), 1.0, COMPUTATIONAL_BASIS).unwrap();
        let col = propagator_column(&spec, 0, t).unwrap();
        let g = strength_function(&q, &col, bins, 3).unwrap();
        prop_assert!((g.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn form_factor_bounded(e in proptest::collection::vec(-5.0f64..5.0, 1..40), t in 0.0f64..50.0) {
        let ts = trace_form_factor(&e, &[0.0, t]).unwrap();
        let f2 = ts.channel("abs_F2").unwrap();
        prop_assert!((f2[0] - 1.0).abs() < 1e-12);
        prop_assert!(f2[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn dense_files_round_trip(h in hamiltonian(), symmetric_layout in any::<bool>()) {
        let raw = decode(&encode_dense(&h, symmetric_layout), 1000).unwrap();
        prop_assert_eq!(raw.header.kind, MatrixKind::Dense);
        prop_assert_eq!(raw.header.dim as usize, h.dim());
        let back = HermitianOperator::symmetrized(raw.matrix, COMPUTATIONAL_BASIS).unwrap();
        prop_assert_eq!(back.row_major(), h.row_major());
    }

    #[test]
    fn coordinate_files_round_trip(
        dim in 1usize..20,
        entries in proptest::collection::vec((0usize..20, 0usize..20, -1e3f64..1e3), 0..50),
    ) {
        let entries: Vec<_> = entries.into_iter().map(|(i, j, v)| (i % dim, j % dim, v)).collect();
        let raw = decode(&encode_coordinate(dim, &entries, false).unwrap(), 1000).unwrap();
        let op = HermitianOperator::symmetrized(raw.matrix, COMPUTATIONAL_BASIS).unwrap();
        let mut expect = vec![0.0; dim * dim];
        for &(i, j, v) in &entries {
            expect[i * dim + j] += v;
        }
        let sym: Vec<f64> = (0..dim * dim).map(|k| 0.5 * (expect[k] + expect[(k % dim) * dim + k / dim])).collect();
        for (a, b) in op.row_major().iter().zip(&sym) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
