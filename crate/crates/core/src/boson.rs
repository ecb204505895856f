//! Spinless bosons on equidistant single-particle levels with random two-body
//! interactions.
//!
//! `H = H₀ + v V`, `H₀ = Σ_k k n_k` (levels `k = 0..n_levels`), and
//! `V = Σ_{αβ} W_{αβ} A†_α A_β` over unordered level pairs `α = (k ≤ l)` with
//! normalized pair annihilators `A_{kl} = c_k c_l / √(1 + δ_kl)`. `W` is a real
//! symmetric matrix of independent Gaussians: variance 1 off the diagonal and
//! 2 on it. Draws use the same ChaCha20 stream as GOE sampling, row-major
//! over the upper triangle of `W`.

use std::collections::{BTreeMap, HashMap};

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::goe::rng_from_seed;
use crate::observables::{momentum_operator, relax, ObservableSpectrum, RelaxationOptions, RelaxationRecord};
use crate::operator::HermitianOperator;
use crate::series::TimeSeries;
use crate::spectral::{diagonalize_with, eigenvalues, spectral_width, state_width, trace_form_factor_scaled, Spectrum};
use crate::tolerances::Tolerances;

/// Basis label of operators written in the occupation-number basis.
pub const OCCUPATION_BASIS: &str = "occupation";

/// Default limit on the many-body dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BosonModelParams {
    pub n_bosons: usize,
    pub n_levels: usize,
    pub v: f64,
    pub seed: u64,
}

impl Default for BosonModelParams {
    fn default() -> Self {
        Self { n_bosons: 6, n_levels: 11, v: 1.0, seed: 42 }
    }
}

impl BosonModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_bosons == 0 || self.n_levels == 0 {
            return Err(Error::InvalidParameter("need at least one boson and one level".into()));
        }
        if self.n_bosons > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("too many bosons: {}", self.n_bosons)));
        }
        if !self.v.is_finite() {
            return Err(Error::InvalidParameter("interaction strength must be finite".into()));
        }
        Ok(())
    }

    /// `C(n_bosons + n_levels - 1, n_bosons)`, or `None` on overflow.
    pub fn dimension(&self) -> Option<u128> {
        binomial((self.n_bosons + self.n_levels).checked_sub(1)? as u128, self.n_bosons as u128)
    }
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc · (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Occupation vectors in descending lexicographic order read from the lowest
/// level, so index 0 has every boson in level 0.
#[derive(Debug, Clone)]
pub struct OccupationBasis {
    n_bosons: usize,
    n_levels: usize,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
}

impl OccupationBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_bosons(&self) -> usize {
        self.n_bosons
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn states(&self) -> &[Vec<u16>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Diagonal of `H₀ = Σ_k k n_k`.
    pub fn unperturbed_energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.iter().enumerate().map(|(k, &n)| (k * n as usize) as f64).sum()).collect()
    }
}

pub fn enumerate_basis(p: &BosonModelParams) -> Result<OccupationBasis> {
    enumerate_basis_capped(p, DEFAULT_DIMENSION_CAP)
}

pub fn enumerate_basis_capped(p: &BosonModelParams, cap: usize) -> Result<OccupationBasis> {
    p.validate()?;
    let dim = p.dimension().ok_or(Error::DimensionOverflow { dim: u128::MAX, cap })?;
    if dim > cap as u128 {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let mut states = Vec::with_capacity(dim as usize);
    let mut current = vec![0u16; p.n_levels];
    fill(&mut current, 0, p.n_bosons, &mut states);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(OccupationBasis { n_bosons: p.n_bosons, n_levels: p.n_levels, states, index })
}

fn fill(current: &mut [u16], level: usize, remaining: usize, out: &mut Vec<Vec<u16>>) {
    if level == current.len() - 1 {
        current[level] = remaining as u16;
        out.push(current.to_vec());
        return;
    }
    for n in (0..=remaining).rev() {
        current[level] = n as u16;
        fill(current, level + 1, remaining - n, out);
    }
    current[level] = 0;
}

/// Random pair-space matrix `W` over unordered level pairs.
#[derive(Debug, Clone)]
pub struct TwoBodyInteraction {
    pairs: Vec<(usize, usize)>,
    w: Mat<f64>,
}

impl TwoBodyInteraction {
    pub fn sample(n_levels: usize, seed: u64) -> Self {
        let pairs: Vec<(usize, usize)> = (0..n_levels).flat_map(|k| (k..n_levels).map(move |l| (k, l))).collect();
        let m = pairs.len();
        let mut rng = rng_from_seed(seed);
        let mut w = Mat::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = if i == j { std::f64::consts::SQRT_2 * z } else { z };
                w[(i, j)] = x;
                w[(j, i)] = x;
            }
        }
        Self { pairs, w }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn element(&self, alpha: usize, beta: usize) -> f64 {
        self.w[(alpha, beta)]
    }
}

/// Symmetric matrix held as its nonzero entries, column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    dim: usize,
    /// `(row, col, value)` for every nonzero, both triangles.
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSymmetric {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Entries with `row ≤ col`.
    pub fn upper_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().copied().filter(|&(i, j, _)| i <= j)
    }

    pub fn to_dense(&self, basis: &str) -> HermitianOperator {
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for &(i, j, x) in &self.entries {
            m[(i, j)] = x;
        }
        HermitianOperator::symmetrized(m, basis).expect("square by construction")
    }
}

/// Assembles `H₀ + vV` in the occupation basis.
pub fn assemble_sparse(p: &BosonModelParams, basis: &OccupationBasis) -> Result<SparseSymmetric> {
    p.validate()?;
    if basis.n_levels() != p.n_levels || basis.n_bosons() != p.n_bosons {
        return Err(Error::DimensionMismatch {
            expected: p.dimension().unwrap_or(0) as usize,
            found: basis.len(),
        });
    }
    let interaction = TwoBodyInteraction::sample(p.n_levels, p.seed);
    let pairs = interaction.pairs();
    let h0 = basis.unperturbed_energies();
    let mut columns: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(basis.len());
    let mut scratch = vec![0u16; p.n_levels];
    for (col, state) in basis.states().iter().enumerate() {
        let mut entries = BTreeMap::new();
        entries.insert(col, h0[col]);
        if p.v != 0.0 {
            for (beta, &(m, n)) in pairs.iter().enumerate() {
                scratch.copy_from_slice(state);
                let Some(amp_in) = annihilate_pair(&mut scratch, m, n) else { continue };
                for (alpha, &(k, l)) in pairs.iter().enumerate() {
                    let w = interaction.element(alpha, beta);
                    let mut target = scratch.clone();
                    let amp_out = create_pair(&mut target, k, l);
                    let row = basis.index_of(&target).expect("pair moves stay in the basis");
                    *entries.entry(row).or_insert(0.0) += p.v * w * amp_in * amp_out;
                }
            }
        }
        columns.push(entries);
    }
    // average with the transpose so the result is exactly symmetric
    let mut out = Vec::new();
    for (col, entries) in columns.iter().enumerate() {
        for (&row, &x) in entries {
            let mirror = columns[row].get(&col).copied().unwrap_or(0.0);
            let value = if row == col { x } else { 0.5 * (x + mirror) };
            if value != 0.0 {
                out.push((row, col, value));
            }
        }
    }
    Ok(SparseSymmetric { dim: basis.len(), entries: out })
}

/// Applies `c_m c_n / √(1 + δ_mn)`, returning the amplitude.
fn annihilate_pair(occ: &mut [u16], m: usize, n: usize) -> Option<f64> {
    if m == n {
        let k = occ[m] as f64;
        if occ[m] < 2 {
            return None;
        }
        occ[m] -= 2;
        Some((k * (k - 1.0) / 2.0).sqrt())
    } else {
        if occ[m] == 0 || occ[n] == 0 {
            return None;
        }
        let amp = (occ[m] as f64 * occ[n] as f64).sqrt();
        occ[m] -= 1;
        occ[n] -= 1;
        Some(amp)
    }
}

/// Applies `c†_k c†_l / √(1 + δ_kl)`, returning the amplitude.
fn create_pair(occ: &mut [u16], k: usize, l: usize) -> f64 {
    if k == l {
        let n = occ[k] as f64;
        occ[k] += 2;
        ((n + 1.0) * (n + 2.0) / 2.0).sqrt()
    } else {
        let amp = ((occ[k] as f64 + 1.0) * (occ[l] as f64 + 1.0)).sqrt();
        occ[k] += 1;
        occ[l] += 1;
        amp
    }
}

pub fn build_hamiltonian(p: &BosonModelParams, basis: &OccupationBasis) -> Result<HermitianOperator> {
    Ok(assemble_sparse(p, basis)?.to_dense(OCCUPATION_BASIS))
}

/// An assembled and diagonalized boson model.
#[derive(Debug, Clone)]
pub struct BosonModel {
    pub params: BosonModelParams,
    pub basis: OccupationBasis,
    pub hamiltonian: HermitianOperator,
    pub spectrum: Spectrum,
    /// Spectral width `λ` of the full Hamiltonian.
    pub lambda: f64,
}

impl BosonModel {
    pub fn build(p: &BosonModelParams) -> Result<Self> {
        Self::build_with(p, DEFAULT_DIMENSION_CAP, &Tolerances::default())
    }

    pub fn build_with(p: &BosonModelParams, cap: usize, tol: &Tolerances) -> Result<Self> {
        let basis = enumerate_basis_capped(p, cap)?;
        let hamiltonian = build_hamiltonian(p, &basis)?;
        log::info!("diagonalizing boson Hamiltonian of dimension {}", basis.len());
        let spectrum = diagonalize_with(&hamiltonian, tol)?;
        let lambda = spectral_width(&hamiltonian);
        Ok(Self { params: *p, basis, hamiltonian, spectrum, lambda })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The observable `Q = H₀ - Tr H₀/𝒩`, diagonal in the occupation basis.
    pub fn observable(&self) -> Result<ObservableSpectrum> {
        centered_unperturbed(&self.basis)
    }

    pub fn state_width(&self, a: usize) -> Result<f64> {
        state_width(&self.hamiltonian, a)
    }

    /// `F(τ)` on a grid of `τ = λt`.
    pub fn form_factor(&self, tau_grid: &[f64]) -> Result<TimeSeries> {
        trace_form_factor_scaled(self.spectrum.energies(), tau_grid, self.lambda, "tau")
    }

    /// Relaxation of basis state `initial` with the extra channel `tau_a =
    /// λ_a t` for per-state rescaling.
    pub fn relax(&self, initial: usize, tau_grid: &[f64], options: RelaxationOptions) -> Result<RelaxationRecord> {
        let n = self.dim();
        if initial >= n {
            return Err(Error::IndexOutOfRange { index: initial, dim: n });
        }
        let q = self.observable()?;
        let momentum = if options.momentum { Some(momentum_operator(&self.hamiltonian, &q)?) } else { None };
        let mut record = relax(&self.spectrum, &q, momentum.as_ref(), initial, tau_grid, self.lambda, options)?;
        let lambda_a = self.state_width(initial)?;
        let tau_a = tau_grid.iter().map(|tau| tau * lambda_a / self.lambda).collect();
        record.series.insert("tau_a", tau_a)?;
        Ok(record)
    }
}

fn centered_unperturbed(basis: &OccupationBasis) -> Result<ObservableSpectrum> {
    let mut e = basis.unperturbed_energies();
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    for x in &mut e {
        *x -= mean;
    }
    ObservableSpectrum::new(e, OCCUPATION_BASIS)
}

/// `F(τ)` of the model from eigenvalues only, with `τ = λt`.
pub fn boson_form_factor(p: &BosonModelParams, tau_grid: &[f64]) -> Result<(TimeSeries, f64)> {
    let basis = enumerate_basis(p)?;
    let h = build_hamiltonian(p, &basis)?;
    let lambda = spectral_width(&h);
    let energies = eigenvalues(&h)?;
    Ok((trace_form_factor_scaled(&energies, tau_grid, lambda, "tau")?, lambda))
}

/// Result of [`run_boson_relaxation`].
#[derive(Debug, Clone)]
pub struct BosonRun {
    pub record: RelaxationRecord,
    pub form_factor: TimeSeries,
    pub lambda: f64,
    pub lambda_a: f64,
    pub dim: usize,
}

pub fn run_boson_relaxation(p: &BosonModelParams, initial: usize, tau_grid: &[f64]) -> Result<BosonRun> {
    let model = BosonModel::build(p)?;
    let record = model.relax(initial, tau_grid, RelaxationOptions::default())?;
    Ok(BosonRun {
        form_factor: model.form_factor(tau_grid)?,
        lambda_a: model.state_width(initial)?,
        lambda: model.lambda,
        dim: model.dim(),
        record,
    })
}
