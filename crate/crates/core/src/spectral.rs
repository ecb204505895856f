//! Exact diagonalization and phase-dynamics time evolution.
//!
//! Every evolution goes through the full eigendecomposition: one `O(N³)`
//! factorization, then `O(N²)` per time point. Batches of time points are
//! evaluated as dense matrix products.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;
use crate::series::TimeSeries;
use crate::tolerances::Tolerances;

/// Eigenvalues in ascending order and the orthogonal matrix whose column `n`
/// is the eigenvector `|n⟩`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    energies: Vec<f64>,
    vectors: Mat<f64>,
    basis: String,
}

/// Columns probed by the post-factorization invariant checks.
const VERIFY_COLUMNS: usize = 48;

/// Upper bound on scratch memory (bytes) for one block of propagated states.
const BLOCK_BYTES: usize = 96 << 20;

impl Spectrum {
    /// Assembles a spectrum from parts. `vectors` must be square with one
    /// column per energy; energies are expected in ascending order.
    pub fn from_parts(energies: Vec<f64>, vectors: Mat<f64>, basis: impl Into<String>) -> Result<Self> {
        let n = energies.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: vectors.nrows() });
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("energies must be ascending".into()));
        }
        Ok(Self { energies, vectors, basis: basis.into() })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    /// `⟨a|n⟩`.
    pub fn component(&self, a: usize, n: usize) -> f64 {
        self.vectors[(a, n)]
    }

    /// Max elementwise `|VᵀV - I|` over the given columns.
    pub fn orthogonality_error(&self, columns: &[usize]) -> f64 {
        let mut worst = 0.0f64;
        for (p, &i) in columns.iter().enumerate() {
            let ci = self.vectors.col(i);
            for &j in &columns[p..] {
                let cj = self.vectors.col(j);
                let dot: f64 = (0..self.dim()).map(|k| ci[k] * cj[k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Max componentwise `|H v_n - E_n v_n|` over the given columns.
    pub fn residual(&self, h: &HermitianOperator, columns: &[usize]) -> Result<f64> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: h.dim() });
        }
        let mut worst = 0.0f64;
        for &n in columns {
            let v: Vec<f64> = (0..self.dim()).map(|a| self.vectors[(a, n)]).collect();
            let hv = h.apply(&v)?;
            for (x, y) in hv.iter().zip(&v) {
                worst = worst.max((x - self.energies[n] * y).abs());
            }
        }
        Ok(worst)
    }

    /// Expansion coefficients `⟨n|ψ⟩` of a packet given in the computational
    /// basis.
    pub fn to_eigenbasis(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if psi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: psi.len() });
        }
        Ok((0..n)
            .map(|k| {
                let col = self.vectors.col(k);
                (0..n).map(|a| psi[a] * col[a]).sum()
            })
            .collect())
    }

    /// Inverse of [`Spectrum::to_eigenbasis`].
    pub fn from_eigenbasis(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: coeffs.len() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, &c) in coeffs.iter().enumerate() {
            let col = self.vectors.col(k);
            for (a, o) in out.iter_mut().enumerate() {
                *o += c * col[a];
            }
        }
        Ok(out)
    }
}

/// Evenly spread column indices used for sampled invariant checks.
pub(crate) fn probe_columns(n: usize, count: usize) -> Vec<usize> {
    if n <= count {
        return (0..n).collect();
    }
    let mut cols: Vec<usize> = (0..count).map(|k| k * (n - 1) / (count - 1)).collect();
    cols.dedup();
    cols
}

pub fn diagonalize(h: &HermitianOperator) -> Result<Spectrum> {
    diagonalize_with(h, &Tolerances::default())
}

/// Full eigendecomposition. Each eigenvector is sign-fixed so that its
/// largest-magnitude component is positive.
pub fn diagonalize_with(h: &HermitianOperator, tol: &Tolerances) -> Result<Spectrum> {
    let (asym, scale) = h.asymmetry();
    if asym > tol.symmetry * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym, scale });
    }
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("cannot diagonalize an empty operator".into()));
    }
    let evd = h
        .matrix()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence { dim: n, basis: h.basis().to_string() })?;
    let energies: Vec<f64> = (0..n).map(|k| evd.S().column_vector()[k]).collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::NoConvergence { dim: n, basis: h.basis().to_string() });
    }
    let mut vectors = evd.U().to_owned();
    for k in 0..n {
        let col = vectors.col(k);
        let mut pivot = 0;
        for a in 1..n {
            if col[a].abs() > col[pivot].abs() {
                pivot = a;
            }
        }
        if col[pivot] < 0.0 {
            for a in 0..n {
                vectors[(a, k)] = -vectors[(a, k)];
            }
        }
    }
    let spec = Spectrum { energies, vectors, basis: h.basis().to_string() };

    let cols = probe_columns(n, VERIFY_COLUMNS);
    let ortho = spec.orthogonality_error(&cols);
    if ortho > tol.orthogonality {
        return Err(Error::Numerical(format!(
            "eigenvectors of the {n}x{n} operator in basis `{}` deviate from orthonormality by {ortho:e}",
            h.basis()
        )));
    }
    let width = spectral_width(h).max(scale).max(f64::MIN_POSITIVE);
    let resid = spec.residual(h, &cols)?;
    if resid > tol.eigen_residual * width {
        return Err(Error::Numerical(format!(
            "eigenpair residual {resid:e} of the {n}x{n} operator in basis `{}` exceeds tolerance",
            h.basis()
        )));
    }
    Ok(spec)
}

/// Eigenvalues only, ascending. Much cheaper than [`diagonalize`].
pub fn eigenvalues(h: &HermitianOperator) -> Result<Vec<f64>> {
    let n = h.dim();
    let values = h
        .matrix()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NoConvergence { dim: n, basis: h.basis().to_string() })?;
    if values.iter().any(|e| !e.is_finite()) {
        return Err(Error::NoConvergence { dim: n, basis: h.basis().to_string() });
    }
    Ok(values)
}

/// Complex amplitudes over a labeled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    basis: String,
    amplitudes: Vec<Complex64>,
}

impl WavePacket {
    pub fn new(basis: impl Into<String>, amplitudes: Vec<Complex64>, tolerance: f64) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { basis: basis.into(), amplitudes })
    }

    pub fn normalized(basis: impl Into<String>, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        for z in &mut amplitudes {
            *z /= norm;
        }
        Ok(Self { basis: basis.into(), amplitudes })
    }

    pub fn basis_state(basis: impl Into<String>, dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { basis: basis.into(), amplitudes })
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &WavePacket) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }
}

fn check_packet(spec: &Spectrum, psi: &WavePacket) -> Result<()> {
    if psi.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: psi.dim() });
    }
    if psi.basis() != spec.basis() {
        return Err(Error::BasisMismatch { expected: spec.basis().into(), found: psi.basis().into() });
    }
    Ok(())
}

/// `e^{-iHt} ψ₀` through the eigenbasis.
pub fn evolve(spec: &Spectrum, psi0: &WavePacket, t: f64) -> Result<WavePacket> {
    check_packet(spec, psi0)?;
    let mut coeffs = spec.to_eigenbasis(psi0.amplitudes())?;
    for (c, &e) in coeffs.iter_mut().zip(spec.energies()) {
        *c *= Complex64::from_polar(1.0, -e * t);
    }
    let amplitudes = spec.from_eigenbasis(&coeffs)?;
    Ok(WavePacket { basis: psi0.basis.clone(), amplitudes })
}

/// Amplitudes `f_{a a₀}(t) = ⟨a|e^{-iHt}|a₀⟩` for every `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorColumn {
    pub t: f64,
    pub source: usize,
    pub entries: Vec<Complex64>,
}

impl PropagatorColumn {
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// The diagonal amplitude `f_{a₀a₀}(t)`.
    pub fn survival_amplitude(&self) -> Complex64 {
        self.entries[self.source]
    }

    pub fn as_packet(&self, basis: impl Into<String>) -> WavePacket {
        WavePacket { basis: basis.into(), amplitudes: self.entries.clone() }
    }
}

pub fn propagator_column(spec: &Spectrum, source: usize, t: f64) -> Result<PropagatorColumn> {
    let n = spec.dim();
    if source >= n {
        return Err(Error::IndexOutOfRange { index: source, dim: n });
    }
    let v = spec.vectors();
    let mut entries = vec![Complex64::new(0.0, 0.0); n];
    for (k, &e) in spec.energies().iter().enumerate() {
        let w = Complex64::from_polar(v[(source, k)], -e * t);
        let col = v.col(k);
        for (a, out) in entries.iter_mut().enumerate() {
            *out += w * col[a];
        }
    }
    Ok(PropagatorColumn { t, source, entries })
}

/// Propagator columns from one source at many times, evaluated blockwise
/// through matrix products.
pub fn propagator_columns(spec: &Spectrum, source: usize, times: &[f64]) -> Result<Vec<PropagatorColumn>> {
    let n = spec.dim();
    if source >= n {
        return Err(Error::IndexOutOfRange { index: source, dim: n });
    }
    let coeffs: Vec<Complex64> = (0..n).map(|k| Complex64::new(spec.vectors[(source, k)], 0.0)).collect();
    let mut out = Vec::with_capacity(times.len());
    for_each_block(spec, &coeffs, times, |block_times, re, im| {
        for (j, &t) in block_times.iter().enumerate() {
            let entries = (0..n).map(|a| Complex64::new(re[(a, j)], im[(a, j)])).collect();
            out.push(PropagatorColumn { t, source, entries });
        }
        Ok(())
    })?;
    Ok(out)
}

/// Evolves the state with eigenbasis coefficients `coeffs` to every time in
/// `times`, handing blocks of states (real and imaginary parts, one column
/// per time) to `visit`.
pub fn for_each_block<F>(spec: &Spectrum, coeffs: &[Complex64], times: &[f64], mut visit: F) -> Result<()>
where
    F: FnMut(&[f64], MatRef<'_, f64>, MatRef<'_, f64>) -> Result<()>,
{
    let n = spec.dim();
    if coeffs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: coeffs.len() });
    }
    let block = (BLOCK_BYTES / (32 * n.max(1))).clamp(1, times.len().max(1));
    for chunk in times.chunks(block) {
        let phase_re = Mat::from_fn(n, chunk.len(), |k, j| {
            (coeffs[k] * Complex64::from_polar(1.0, -spec.energies[k] * chunk[j])).re
        });
        let phase_im = Mat::from_fn(n, chunk.len(), |k, j| {
            (coeffs[k] * Complex64::from_polar(1.0, -spec.energies[k] * chunk[j])).im
        });
        let re = spec.vectors.as_ref() * &phase_re;
        let im = spec.vectors.as_ref() * &phase_im;
        visit(chunk, re.as_ref(), im.as_ref())?;
    }
    Ok(())
}

/// `F(t) = (1/N) Σ_n e^{-iE_n t}` on a grid named `grid_name`, where the
/// physical time is `grid / scale`.
pub fn trace_form_factor_scaled(
    energies: &[f64],
    grid: &[f64],
    scale: f64,
    grid_name: &str,
) -> Result<TimeSeries> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if energies.is_empty() {
        return Err(Error::InvalidParameter("empty spectrum".into()));
    }
    let n = energies.len() as f64;
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    for &g in grid {
        let t = g / scale;
        let (mut sr, mut si) = (0.0, 0.0);
        for &e in energies {
            let (s, c) = (e * t).sin_cos();
            sr += c;
            si -= s;
        }
        re.push(sr / n);
        im.push(si / n);
    }
    let abs2 = re.iter().zip(&im).map(|(r, i)| r * r + i * i).collect();
    TimeSeries::new(grid_name, grid.to_vec())?
        .with("re_F", re)?
        .with("im_F", im)?
        .with("abs_F2", abs2)
}

pub fn trace_form_factor(energies: &[f64], times: &[f64]) -> Result<TimeSeries> {
    trace_form_factor_scaled(energies, times, 1.0, "t")
}

/// `λ = √(Tr H²/N - (Tr H/N)²)`, straight from the matrix entries.
pub fn spectral_width(h: &HermitianOperator) -> f64 {
    let n = h.dim();
    if n == 0 {
        return 0.0;
    }
    let m = h.matrix();
    let mut sum_sq = 0.0;
    for j in 0..n {
        let col = m.col(j);
        for i in 0..n {
            sum_sq += col[i] * col[i];
        }
    }
    let mean = h.trace() / n as f64;
    (sum_sq / n as f64 - mean * mean).max(0.0).sqrt()
}

/// `λ_a = √(⟨a|H²|a⟩ - ⟨a|H|a⟩²)` from the single column `H|a⟩`.
pub fn state_width(h: &HermitianOperator, a: usize) -> Result<f64> {
    let n = h.dim();
    if a >= n {
        return Err(Error::IndexOutOfRange { index: a, dim: n });
    }
    let col = h.matrix().col(a);
    let off: f64 = (0..n).filter(|&b| b != a).map(|b| col[b] * col[b]).sum();
    Ok(off.sqrt())
}

pub fn state_widths(h: &HermitianOperator) -> Vec<f64> {
    (0..h.dim()).map(|a| state_width(h, a).expect("index in range")).collect()
}

/// Variance of the diagonal matrix elements `H_aa` over the basis.
pub fn diagonal_variance(h: &HermitianOperator) -> f64 {
    let d = h.diagonal();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    d.iter().map(|x| x * x).sum::<f64>() / n - mean * mean
}

/// Taylor coefficients of `Q_a(t) = ⟨a|e^{iHt} Q e^{-iHt}|a⟩` about `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimeExpansion {
    pub coefficients: [f64; 3],
    pub order: usize,
}

impl ShortTimeExpansion {
    pub fn eval(&self, t: f64) -> f64 {
        let c = &self.coefficients;
        match self.order {
            0 => c[0],
            1 => c[0] + c[1] * t,
            _ => c[0] + c[1] * t + c[2] * t * t,
        }
    }
}

/// Coefficients through `order ≤ 2` of the Heisenberg series, built from the
/// nested commutators `[H,Q]` and `[H,[H,Q]]` applied to `|a⟩`.
pub fn short_time_expansion(
    h: &HermitianOperator,
    q: &HermitianOperator,
    a: usize,
    order: usize,
) -> Result<ShortTimeExpansion> {
    let n = h.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.dim() });
    }
    if a >= n {
        return Err(Error::IndexOutOfRange { index: a, dim: n });
    }
    if order > 2 {
        return Err(Error::InvalidParameter(format!("expansion order must be at most 2, got {order}")));
    }
    let mut e_a = vec![0.0; n];
    e_a[a] = 1.0;
    let he = h.apply(&e_a)?;
    let qe = q.apply(&e_a)?;
    // [H,Q]|a⟩ = H Q|a⟩ - Q H|a⟩
    let hqe = h.apply(&qe)?;
    let qhe = q.apply(&he)?;
    let c1_vec: Vec<f64> = hqe.iter().zip(&qhe).map(|(x, y)| x - y).collect();
    // [H,[H,Q]]|a⟩ = H ([H,Q]|a⟩) - [H,Q] H|a⟩
    let h_c1 = h.apply(&c1_vec)?;
    let hqhe = h.apply(&q.apply(&he)?)?;
    let qhhe = q.apply(&h.apply(&he)?)?;
    let c2_vec: Vec<f64> = (0..n).map(|k| h_c1[k] - (hqhe[k] - qhhe[k])).collect();

    // i^k t^k / k! ⟨a|ad_H^k Q|a⟩; the first-order term is i times the
    // expectation of an antisymmetric operator in a real state.
    let first = c1_vec[a];
    let second = c2_vec[a];
    let mut coefficients = [q.get(a, a), 0.0, 0.0];
    if order >= 1 {
        coefficients[1] = first;
    }
    if order >= 2 {
        coefficients[2] = -0.5 * second;
    }
    Ok(ShortTimeExpansion { coefficients, order })
}

/// Leading short-time transition probability `t² H_{ab}²` between distinct
/// basis states.
pub fn short_time_transition(h: &HermitianOperator, a: usize, b: usize, t: f64) -> Result<f64> {
    let n = h.dim();
    for idx in [a, b] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, dim: n });
        }
    }
    let hab = h.get(a, b);
    Ok(t * t * hab * hab)
}
