//! Time-dependent diagnostics of an evolving basis state: survival
//! probability, observable moments, conjugate momentum, number of principal
//! components, amplitude statistics and the time-dependent strength function.
//!
//! All quantities are computed in the eigenbasis `{|a⟩}` of the observable
//! `Q`, where `Q` is diagonal and the Hamiltonian is a dense symmetric matrix.

use faer::{Mat, MatRef};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;
use crate::series::TimeSeries;
use crate::spectral::{for_each_block, PropagatorColumn, Spectrum, WavePacket};

/// Minimum number of off-diagonal amplitudes accepted by
/// [`amplitude_histogram`].
pub const MIN_HISTOGRAM_SAMPLES: usize = 100;

/// Eigenvalues `Q_a` of an observable, indexed by the basis in which it is
/// diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSpectrum {
    values: Vec<f64>,
    basis: String,
}

impl ObservableSpectrum {
    pub fn new(values: Vec<f64>, basis: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("observable spectrum is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("observable spectrum has non-finite values".into()));
        }
        Ok(Self { values, basis: basis.into() })
    }

    /// `dim` equally spaced values on `[-√3 q, √3 q]`, shifted to zero trace.
    pub fn uniform_traceless(dim: usize, q: f64, basis: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("observable dimension must be at least 1".into()));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParameter(format!("observable scale must be positive, got {q}")));
        }
        let half = 3f64.sqrt() * q;
        let mut values = crate::series::linspace(-half, half, dim);
        if dim == 1 {
            values[0] = 0.0;
        }
        let mean = values.iter().sum::<f64>() / dim as f64;
        for v in &mut values {
            *v -= mean;
        }
        Self::new(values, basis)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `Tr Q² / 𝒩`.
    pub fn trq2_over_n(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.dim() as f64
    }

    /// Index whose value is nearest `target`; ties go to the lower index.
    pub fn nearest_index(&self, target: f64) -> usize {
        let mut best = 0;
        for (a, v) in self.values.iter().enumerate() {
            if (v - target).abs() < (self.values[best] - target).abs() {
                best = a;
            }
        }
        best
    }

    pub fn to_operator(&self) -> HermitianOperator {
        HermitianOperator::from_diagonal(&self.values, self.basis.clone())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect(), basis: self.basis.clone() }
    }
}

fn check_basis(expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::BasisMismatch { expected: expected.into(), found: found.into() });
    }
    Ok(())
}

/// Conjugate momentum `P = dQ/dt = i[H,Q]`, stored as the real antisymmetric
/// matrix `K = HQ - QH` with `P = iK`.
#[derive(Debug, Clone)]
pub struct MomentumOperator {
    k: Mat<f64>,
    basis: String,
}

impl MomentumOperator {
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn basis(&self) -> &str {
        &self.basis
    }

    /// The antisymmetric generator `K` (so that `P = iK`).
    pub fn generator(&self) -> MatRef<'_, f64> {
        self.k.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.k[(i, j)] == 0.0))
    }

    /// `⟨ψ|P|ψ⟩ = -2 xᵀK y` for `ψ = x + iy`.
    pub fn expectation(&self, psi: &WavePacket) -> Result<f64> {
        check_basis(&self.basis, psi.basis())?;
        let (x, y) = split(psi, self.dim())?;
        let ky = mat_vec(self.k.as_ref(), &y);
        Ok(-2.0 * dot(&x, &ky))
    }

    /// `⟨ψ|P²|ψ⟩ = ‖Kψ‖²`.
    pub fn expectation_sq(&self, psi: &WavePacket) -> Result<f64> {
        check_basis(&self.basis, psi.basis())?;
        let (x, y) = split(psi, self.dim())?;
        let kx = mat_vec(self.k.as_ref(), &x);
        let ky = mat_vec(self.k.as_ref(), &y);
        Ok(dot(&kx, &kx) + dot(&ky, &ky))
    }

    /// The Hermitian matrix `P` itself, as complex entries.
    pub fn to_complex(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| Complex64::new(0.0, self.k[(i, j)])).collect()).collect()
    }
}

fn split(psi: &WavePacket, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if psi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: psi.dim() });
    }
    Ok((psi.amplitudes().iter().map(|z| z.re).collect(), psi.amplitudes().iter().map(|z| z.im).collect()))
}

fn mat_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds `P = i[H,Q]` for `Q` diagonal in the basis of `h`:
/// `K_ab = H_ab (Q_b - Q_a)`.
pub fn momentum_operator(h: &HermitianOperator, q: &ObservableSpectrum) -> Result<MomentumOperator> {
    let n = h.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.dim() });
    }
    check_basis(h.basis(), q.basis())?;
    let qv = q.values();
    let k = Mat::from_fn(n, n, |a, b| h.get(a, b) * (qv[b] - qv[a]));
    Ok(MomentumOperator { k, basis: h.basis().to_string() })
}

/// Builds `P = i[H,Q]` for a general symmetric `Q` through matrix products.
pub fn momentum_operator_general(h: &HermitianOperator, q: &HermitianOperator) -> Result<MomentumOperator> {
    let n = h.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.dim() });
    }
    check_basis(h.basis(), q.basis())?;
    let hq = h.matrix() * q.matrix();
    let k = Mat::from_fn(n, n, |i, j| hq[(i, j)] - hq[(j, i)]);
    Ok(MomentumOperator { k, basis: h.basis().to_string() })
}

fn column_grid(cols: &[PropagatorColumn]) -> Result<Vec<f64>> {
    let first = cols.first().ok_or(Error::EmptyGrid)?;
    if cols.iter().any(|c| c.source != first.source) {
        return Err(Error::InvalidParameter("propagator columns have different sources".into()));
    }
    Ok(cols.iter().map(|c| c.t).collect())
}

/// `|f_{a₀a₀}(t)|²` on the times of `cols`.
pub fn survival_probability(cols: &[PropagatorColumn]) -> Result<TimeSeries> {
    let grid = column_grid(cols)?;
    let values = cols.iter().map(|c| c.survival_amplitude().norm_sqr()).collect();
    TimeSeries::new("t", grid)?.with("survival", values)
}

/// `Σ_a Q_a |ψ_a|²`.
pub fn expectation_q(q: &ObservableSpectrum, psi: &WavePacket) -> Result<f64> {
    check_basis(q.basis(), psi.basis())?;
    if psi.dim() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: psi.dim() });
    }
    Ok(q.values().iter().zip(psi.amplitudes()).map(|(v, z)| v * z.norm_sqr()).sum())
}

/// Variance of `Q` in `ψ`.
pub fn uncertainty_q(q: &ObservableSpectrum, psi: &WavePacket) -> Result<f64> {
    let mean = expectation_q(q, psi)?;
    let second: f64 = q.values().iter().zip(psi.amplitudes()).map(|(v, z)| v * v * z.norm_sqr()).sum();
    Ok(second - mean * mean)
}

/// `(Σ_a |c_a|⁴)⁻¹` for normalized amplitudes.
pub fn participation_number(amplitudes: &[Complex64]) -> Result<f64> {
    let sum2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
    if sum2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sum4: f64 = amplitudes.iter().map(|z| z.norm_sqr().powi(2)).sum();
    Ok(sum2 * sum2 / sum4)
}

/// Time-dependent number of principal components of the evolving state.
pub fn npc(cols: &[PropagatorColumn]) -> Result<TimeSeries> {
    let grid = column_grid(cols)?;
    let values = cols.iter().map(|c| participation_number(&c.entries)).collect::<Result<_>>()?;
    TimeSeries::new("t", grid)?.with("NPC", values)
}

/// What a static participation number is measured for.
#[derive(Debug, Clone, PartialEq)]
pub enum NpcTarget<'a> {
    /// Basis state `|a⟩` expanded in the eigenbasis.
    BasisState(usize),
    /// Eigenvector `|n⟩` expanded in the computational basis.
    Eigenvector(usize),
    /// Arbitrary computational-basis vector expanded in the eigenbasis.
    Vector(&'a [Complex64]),
}

pub fn static_npc(spec: &Spectrum, target: NpcTarget<'_>) -> Result<f64> {
    let n = spec.dim();
    let v = spec.vectors();
    match target {
        NpcTarget::BasisState(a) => {
            if a >= n {
                return Err(Error::IndexOutOfRange { index: a, dim: n });
            }
            let row: Vec<Complex64> = (0..n).map(|k| Complex64::new(v[(a, k)], 0.0)).collect();
            participation_number(&row)
        }
        NpcTarget::Eigenvector(k) => {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, dim: n });
            }
            let col: Vec<Complex64> = (0..n).map(|a| Complex64::new(v[(a, k)], 0.0)).collect();
            participation_number(&col)
        }
        NpcTarget::Vector(psi) => participation_number(&spec.to_eigenbasis(psi)?),
    }
}

/// The three non-negative terms of `|f|² + Σ(Re f_a)² + Σ(Im f_a)² = 1`,
/// with the sums running over `a ≠ a₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub survival: f64,
    pub sum_re2: f64,
    pub sum_im2: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.survival + self.sum_re2 + self.sum_im2
    }
}

pub fn amplitude_decomposition(col: &PropagatorColumn) -> Decomposition {
    let mut d = Decomposition { survival: 0.0, sum_re2: 0.0, sum_im2: 0.0 };
    for (a, z) in col.entries.iter().enumerate() {
        if a == col.source {
            d.survival = z.norm_sqr();
        } else {
            d.sum_re2 += z.re * z.re;
            d.sum_im2 += z.im * z.im;
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AmplitudePart {
    Real,
    Imag,
}

/// Histogram bin selection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Binning {
    /// Width `2·IQR·n^{-1/3}`.
    #[default]
    FreedmanDiaconis,
    Count(usize),
}

/// Summary statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// `m₄/m₂² - 3`; zero for a normal distribution.
    pub excess_kurtosis: f64,
    /// Kolmogorov–Smirnov distance to the normal law with the sample's mean
    /// and standard deviation.
    pub ks_normal: f64,
}

/// Density histogram of off-diagonal propagator amplitudes plus the
/// peak-aligned view: `x_scaled = (x - x_peak)·√κ`, `density_scaled =
/// density/density_peak`, where `κ = -(ln p)''` at the peak. In these units a
/// normal law reads `exp(-x²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeHistogram {
    pub part: AmplitudePart,
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub peak: f64,
    pub curvature: f64,
    pub stats: SampleStats,
}

impl AmplitudeHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin centers as the grid, with raw and peak-aligned channels.
    pub fn to_series(&self) -> Result<TimeSeries> {
        let centers = self.centers();
        let p_max = self.density.iter().cloned().fold(0.0, f64::max);
        let root = self.curvature.sqrt();
        let x_scaled: Vec<f64> = centers.iter().map(|x| (x - self.peak) * root).collect();
        let d_scaled = self.density.iter().map(|d| if p_max > 0.0 { d / p_max } else { 0.0 }).collect();
        let normal = x_scaled.iter().map(|u| (-0.5 * u * u).exp()).collect();
        TimeSeries::new("x", centers)?
            .with("density", self.density.clone())?
            .with("x_scaled", x_scaled)?
            .with("density_scaled", d_scaled)?
            .with("normal_scaled", normal)
    }
}

pub fn sample_stats(samples: &[f64]) -> SampleStats {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let std_dev = m2.sqrt();
    let excess_kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    let ks_normal = if std_dev > 0.0 {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut d = 0.0f64;
        for (i, x) in sorted.iter().enumerate() {
            let cdf = 0.5 * (1.0 + libm::erf((x - mean) / (std_dev * std::f64::consts::SQRT_2)));
            d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
        }
        d
    } else {
        1.0
    };
    SampleStats { count: samples.len(), mean, std_dev, excess_kurtosis, ks_normal }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn bin_edges(samples: &[f64], binning: Binning) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if hi == lo {
        return vec![lo - 0.5, lo + 0.5];
    }
    let count = match binning {
        Binning::Count(c) => c.max(1),
        Binning::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let n = sorted.len() as f64;
            if iqr > 0.0 {
                let width = 2.0 * iqr / n.cbrt();
                ((hi - lo) / width).ceil().clamp(1.0, 10_000.0) as usize
            } else {
                // Sturges
                (n.log2().ceil() as usize + 1).max(1)
            }
        }
    };
    crate::series::linspace(lo, hi, count + 1)
}

fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if x < edges[0] || x > edges[last] {
        return None;
    }
    let pos = edges.partition_point(|&e| e <= x);
    Some(pos.saturating_sub(1).min(last - 1))
}

/// Least-squares parabola through `(x, ln y)` around the tallest bin;
/// returns `(x_peak, κ)`.
fn peak_and_curvature(centers: &[f64], density: &[f64], fallback_var: f64) -> (f64, f64) {
    let fallback = (if fallback_var > 0.0 { 1.0 / fallback_var } else { 1.0 }, 0.0);
    let imax = density.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let lo = imax.saturating_sub(2);
    let hi = (imax + 2).min(density.len() - 1);
    let pts: Vec<(f64, f64)> = (lo..=hi).filter(|&i| density[i] > 0.0).map(|i| (centers[i] - centers[imax], density[i].ln())).collect();
    if pts.len() < 3 {
        return (centers[imax], fallback.0);
    }
    // normal equations for y = c0 + c1 x + c2 x²
    let mut s = [0.0; 5];
    let mut r = [0.0; 3];
    for &(x, y) in &pts {
        let mut p = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                r[k] += p * y;
            }
            p *= x;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d == 0.0 {
        return (centers[imax], fallback.0);
    }
    let solve = |col: usize| {
        let mut mm = m;
        for row in 0..3 {
            mm[row][col] = r[row];
        }
        det(mm) / d
    };
    let (c1, c2) = (solve(1), solve(2));
    if !(c2 < 0.0) {
        return (centers[imax], fallback.0);
    }
    let shift = (-c1 / (2.0 * c2)).clamp(pts[0].0, pts[pts.len() - 1].0);
    (centers[imax] + shift, -2.0 * c2)
}

/// Histogram of the real or imaginary parts of the off-diagonal amplitudes
/// `f_{a a₀}`, `a ≠ a₀`.
pub fn amplitude_histogram(col: &PropagatorColumn, part: AmplitudePart, binning: Binning) -> Result<AmplitudeHistogram> {
    let samples: Vec<f64> = col
        .entries
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != col.source)
        .map(|(_, z)| match part {
            AmplitudePart::Real => z.re,
            AmplitudePart::Imag => z.im,
        })
        .collect();
    if samples.len() < MIN_HISTOGRAM_SAMPLES {
        return Err(Error::TooFewSamples { found: samples.len(), required: MIN_HISTOGRAM_SAMPLES });
    }
    let edges = bin_edges(&samples, binning);
    let mut counts = vec![0usize; edges.len() - 1];
    for &x in &samples {
        if let Some(b) = bin_index(&edges, x) {
            counts[b] += 1;
        }
    }
    let n = samples.len() as f64;
    let density: Vec<f64> = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    let stats = sample_stats(&samples);
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let (peak, curvature) = peak_and_curvature(&centers, &density, stats.std_dev.powi(2));
    Ok(AmplitudeHistogram { part, edges, density, peak, curvature, stats })
}

/// Time-dependent strength function: weights `|f_{a a₀}(t)|²` binned by the
/// observable value `Q_a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrengthFunction {
    pub t: f64,
    pub edges: Vec<f64>,
    /// Total weight per bin; sums to 1 for a normalized column.
    pub mass: Vec<f64>,
    /// Weight per bin excluding the initial state.
    pub off_diagonal_mass: Vec<f64>,
    /// Observable values of the off-diagonal states in ascending order.
    pub smoothed_q: Vec<f64>,
    /// Moving average of the off-diagonal weights over `smoothed_q`.
    pub smoothed_weight: Vec<f64>,
}

impl StrengthFunction {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn to_series(&self) -> Result<TimeSeries> {
        let centers = self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        TimeSeries::new("Q", centers)?
            .with("mass", self.mass.clone())?
            .with("off_diagonal_mass", self.off_diagonal_mass.clone())
    }
}

/// Bins the weights of `col` over `bins` equal-width intervals spanning the
/// observable spectrum. `window` is the moving-average width (in states) for
/// the smoothed off-diagonal weights.
pub fn strength_function(
    q: &ObservableSpectrum,
    col: &PropagatorColumn,
    bins: usize,
    window: usize,
) -> Result<StrengthFunction> {
    let n = q.dim();
    if col.entries.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: col.entries.len() });
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("strength function needs at least one bin".into()));
    }
    let lo = q.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = q.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let edges = if hi > lo { crate::series::linspace(lo, hi, bins + 1) } else { vec![lo - 0.5, lo + 0.5] };
    let mut mass = vec![0.0; edges.len() - 1];
    let mut off = vec![0.0; edges.len() - 1];
    for (a, z) in col.entries.iter().enumerate() {
        let b = bin_index(&edges, q.values()[a]).expect("observable value inside its own range");
        let w = z.norm_sqr();
        mass[b] += w;
        if a != col.source {
            off[b] += w;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&a| a != col.source).collect();
    order.sort_by(|&x, &y| q.values()[x].total_cmp(&q.values()[y]));
    let weights: Vec<f64> = order.iter().map(|&a| col.entries[a].norm_sqr()).collect();
    let smoothed_q = order.iter().map(|&a| q.values()[a]).collect();
    let smoothed_weight = moving_average(&weights, window.max(1));
    Ok(StrengthFunction { t: col.t, edges, mass, off_diagonal_mass: off, smoothed_q, smoothed_weight })
}

/// Centered moving average, window truncated at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Options of [`relax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationOptions {
    /// Emit `P` and `P2` from the momentum operator.
    pub momentum: bool,
    /// Also emit `P_fd`, the finite-difference derivative of `Q`.
    pub finite_difference: bool,
}

impl Default for RelaxationOptions {
    fn default() -> Self {
        Self { momentum: true, finite_difference: false }
    }
}

/// Relaxation of one initial basis state on a scaled-time grid.
///
/// Channels: `survival`, `re_f`, `im_f`, `Q`, `dQ2`, `P`, `P2`, `NPC`,
/// `sum_re2`, `sum_im2` (and `P_fd` on request). Momenta are in scaled
/// units: `P/λ` and `P²/λ²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationRecord {
    pub series: TimeSeries,
    pub initial_index: usize,
    pub q0: f64,
    pub lambda: f64,
    pub dim: usize,
}

impl RelaxationRecord {
    pub fn channel(&self, name: &str) -> &[f64] {
        self.series.channel(name).unwrap_or_else(|| panic!("relaxation record has no channel `{name}`"))
    }

    pub fn tau(&self) -> &[f64] {
        self.series.grid()
    }
}

/// Evolves basis state `initial` under the Hamiltonian with spectrum `spec`
/// (both expressed in the eigenbasis of `q`) at times `t = τ/λ`.
pub fn relax(
    spec: &Spectrum,
    q: &ObservableSpectrum,
    momentum: Option<&MomentumOperator>,
    initial: usize,
    tau_grid: &[f64],
    lambda: f64,
    options: RelaxationOptions,
) -> Result<RelaxationRecord> {
    let n = spec.dim();
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.dim() });
    }
    check_basis(spec.basis(), q.basis())?;
    if initial >= n {
        return Err(Error::IndexOutOfRange { index: initial, dim: n });
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("energy scale must be positive, got {lambda}")));
    }
    if options.momentum && momentum.is_none() {
        return Err(Error::InvalidParameter("momentum channels requested without a momentum operator".into()));
    }
    if let Some(m) = momentum {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.dim() });
        }
        check_basis(spec.basis(), m.basis())?;
    }
    let times: Vec<f64> = tau_grid.iter().map(|tau| tau / lambda).collect();
    let coeffs: Vec<Complex64> = (0..n).map(|k| Complex64::new(spec.component(initial, k), 0.0)).collect();
    let qv = q.values();
    let len = tau_grid.len();
    let mut ch: [Vec<f64>; 10] = std::array::from_fn(|_| Vec::with_capacity(len));
    for_each_block(spec, &coeffs, &times, |block, re, im| {
        let (kre, kim) = match (options.momentum, momentum) {
            (true, Some(m)) => (Some(m.k.as_ref() * re), Some(m.k.as_ref() * im)),
            _ => (None, None),
        };
        for (j, &t) in block.iter().enumerate() {
            let exact_start = t == 0.0;
            let amp = |a: usize| {
                if exact_start {
                    // e^{-iH·0} = 1
                    if a == initial {
                        (1.0, 0.0)
                    } else {
                        (0.0, 0.0)
                    }
                } else {
                    (re[(a, j)], im[(a, j)])
                }
            };
            let (mut qm, mut q2, mut s4, mut sr, mut si) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (a, &qa) in qv.iter().enumerate() {
                let (x, y) = amp(a);
                let p = x * x + y * y;
                qm += qa * p;
                q2 += qa * qa * p;
                s4 += p * p;
                if a != initial {
                    sr += x * x;
                    si += y * y;
                }
            }
            let (fr, fi) = amp(initial);
            ch[0].push(fr * fr + fi * fi);
            ch[1].push(fr);
            ch[2].push(fi);
            ch[3].push(qm);
            ch[4].push(q2 - qm * qm);
            ch[5].push(1.0 / s4);
            ch[6].push(sr);
            ch[7].push(si);
            if let (Some(kre), Some(kim), Some(m)) = (&kre, &kim, momentum) {
                let (p, p2) = if exact_start {
                    let col = m.k.col(initial);
                    (0.0, (0..n).map(|a| col[a] * col[a]).sum::<f64>())
                } else {
                    let mut xky = 0.0;
                    let mut p2 = 0.0;
                    for a in 0..n {
                        xky += re[(a, j)] * kim[(a, j)];
                        p2 += kre[(a, j)].powi(2) + kim[(a, j)].powi(2);
                    }
                    (-2.0 * xky, p2)
                };
                ch[8].push(p / lambda);
                ch[9].push(p2 / (lambda * lambda));
            }
        }
        Ok(())
    })?;
    let [survival, re_f, im_f, qch, dq2, npc_ch, sum_re2, sum_im2, p, p2] = ch;
    let mut series = TimeSeries::new("tau", tau_grid.to_vec())?
        .with("survival", survival)?
        .with("re_f", re_f)?
        .with("im_f", im_f)?
        .with("Q", qch.clone())?
        .with("dQ2", dq2)?;
    if options.momentum {
        series.insert("P", p)?;
        series.insert("P2", p2)?;
    }
    series.insert("NPC", npc_ch)?;
    series.insert("sum_re2", sum_re2)?;
    series.insert("sum_im2", sum_im2)?;
    if options.finite_difference {
        series.insert("P_fd", gradient(tau_grid, &qch))?;
    }
    Ok(RelaxationRecord { series, initial_index: initial, q0: qv[initial], lambda, dim: n })
}

/// Derivative of sampled data: second-order central differences inside,
/// one-sided at the ends.
pub fn gradient(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                (h0 * h0 * y[i + 1] - h1 * h1 * y[i - 1] + (h1 * h1 - h0 * h0) * y[i]) / (h0 * h1 * (h0 + h1))
            }
        })
        .collect()
}

/// `(1/𝒩) Σ_a |f_{aa}(t)|²`, the survival probability averaged over every
/// basis state, at `t = τ/λ`.
pub fn mean_survival(spec: &Spectrum, tau_grid: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if tau_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = spec.dim();
    let v = spec.vectors();
    let w = Mat::from_fn(n, n, |a, k| v[(a, k)] * v[(a, k)]);
    let block = ((96usize << 20) / (32 * n)).clamp(1, tau_grid.len());
    let mut out = Vec::with_capacity(tau_grid.len());
    for chunk in tau_grid.chunks(block) {
        let c = Mat::from_fn(n, chunk.len(), |k, j| (spec.energies()[k] * chunk[j] / lambda).cos());
        let s = Mat::from_fn(n, chunk.len(), |k, j| (spec.energies()[k] * chunk[j] / lambda).sin());
        let re = &w * &c;
        let im = &w * &s;
        for j in 0..chunk.len() {
            let total: f64 = (0..n).map(|a| re[(a, j)].powi(2) + im[(a, j)].powi(2)).sum();
            out.push(total / n as f64);
        }
    }
    Ok(out)
}

/// `[mean_{a₀} Σ_a |f_{a a₀}|⁴]⁻¹` over the given initial states: the
/// participation number with the inverse participation ratio averaged over
/// initial states.
pub fn ensemble_npc(spec: &Spectrum, sources: &[usize], tau_grid: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if sources.is_empty() {
        return Err(Error::InvalidParameter("ensemble needs at least one initial state".into()));
    }
    let n = spec.dim();
    let times: Vec<f64> = tau_grid.iter().map(|tau| tau / lambda).collect();
    let mut ipr = vec![0.0; times.len()];
    for &s in sources {
        if s >= n {
            return Err(Error::IndexOutOfRange { index: s, dim: n });
        }
        let coeffs: Vec<Complex64> = (0..n).map(|k| Complex64::new(spec.component(s, k), 0.0)).collect();
        let mut offset = 0;
        for_each_block(spec, &coeffs, &times, |block, re, im| {
            for (j, &t) in block.iter().enumerate() {
                ipr[offset + j] += if t == 0.0 {
                    1.0
                } else {
                    (0..n).map(|a| (re[(a, j)].powi(2) + im[(a, j)].powi(2)).powi(2)).sum::<f64>()
                };
            }
            offset += block.len();
            Ok(())
        })?;
    }
    Ok(ipr.iter().map(|s| sources.len() as f64 / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goe::{sample_goe, GoeParams};
    use crate::spectral::{diagonalize, propagator_column};

    fn goe_setup(n: usize, seed: u64) -> (HermitianOperator, Spectrum, ObservableSpectrum) {
        let h = sample_goe(&GoeParams::new(n, 1.0, seed).unwrap()).unwrap();
        let s = diagonalize(&h).unwrap();
        let q = ObservableSpectrum::uniform_traceless(n, 1.0, h.basis()).unwrap();
        (h, s, q)
    }

    #[test]
    fn uniform_spectrum_is_traceless() {
        let q = ObservableSpectrum::uniform_traceless(1001, 1.0, "x").unwrap();
        assert!(q.trace().abs() < 1e-12);
        assert!((q.trq2_over_n() - 1.0).abs() < 0.01);
        let one = ObservableSpectrum::uniform_traceless(1, 1.0, "x").unwrap();
        assert_eq!(one.values(), &[0.0]);
    }

    #[test]
    fn nearest_index_ties_go_low() {
        let q = ObservableSpectrum::new(vec![-1.0, 0.0, 1.0], "x").unwrap();
        assert_eq!(q.nearest_index(0.5), 1);
        assert_eq!(q.nearest_index(-0.5), 0);
        assert_eq!(q.nearest_index(9.0), 2);
    }

    #[test]
    fn eigenstate_moments() {
        let q = ObservableSpectrum::new(vec![-1.0, 0.25, 2.0], "x").unwrap();
        let psi = WavePacket::basis_state("x", 3, 1).unwrap();
        assert_eq!(expectation_q(&q, &psi).unwrap(), 0.25);
        assert_eq!(uncertainty_q(&q, &psi).unwrap(), 0.0);
        let other = WavePacket::basis_state("y", 3, 1).unwrap();
        assert!(matches!(expectation_q(&q, &other), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn commuting_momentum_vanishes() {
        let h = HermitianOperator::from_diagonal(&[1.0, 2.0, 3.0], "x");
        let q = ObservableSpectrum::new(vec![0.5, 0.1, -0.6], "x").unwrap();
        assert!(momentum_operator(&h, &q).unwrap().is_zero());
    }

    #[test]
    fn momentum_forms_agree() {
        let (h, _, q) = goe_setup(12, 2);
        let a = momentum_operator(&h, &q).unwrap();
        let b = momentum_operator_general(&h, &q.to_operator()).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!((a.generator()[(i, j)] - b.generator()[(i, j)]).abs() < 1e-14);
                assert_eq!(a.generator()[(i, j)], -a.generator()[(j, i)]);
            }
        }
    }

    #[test]
    fn momentum_is_time_derivative_of_q() {
        let (h, s, q) = goe_setup(30, 6);
        let m = momentum_operator(&h, &q).unwrap();
        let psi0 = WavePacket::basis_state(h.basis(), 30, 4).unwrap();
        let (t, dt) = (0.8, 1e-5);
        let qp = expectation_q(&q, &crate::spectral::evolve(&s, &psi0, t + dt).unwrap()).unwrap();
        let qm = expectation_q(&q, &crate::spectral::evolve(&s, &psi0, t - dt).unwrap()).unwrap();
        let p = m.expectation(&crate::spectral::evolve(&s, &psi0, t).unwrap()).unwrap();
        assert!(((qp - qm) / (2.0 * dt) - p).abs() < 1e-8);
    }

    #[test]
    fn column_diagnostics_at_zero() {
        let (_, s, _) = goe_setup(20, 1);
        let col = propagator_column(&s, 3, 0.0).unwrap();
        let d = amplitude_decomposition(&col);
        assert!((d.survival - 1.0).abs() < 1e-12 && d.sum_re2 < 1e-24 && d.sum_im2 < 1e-24);
        let cols = vec![col];
        assert!((npc(&cols).unwrap().channel("NPC").unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((survival_probability(&cols).unwrap().channel("survival").unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn static_npc_of_eigenvector_is_one() {
        let (_, s, _) = goe_setup(16, 3);
        let v: Vec<Complex64> = (0..16).map(|a| Complex64::new(s.component(a, 5), 0.0)).collect();
        assert!((static_npc(&s, NpcTarget::Vector(&v)).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(static_npc(&s, NpcTarget::Vector(&[Complex64::new(0.0, 0.0); 16])), Err(Error::ZeroVector)));
    }

    #[test]
    fn histogram_rejects_small_samples() {
        let (_, s, _) = goe_setup(50, 1);
        let col = propagator_column(&s, 0, 1.0).unwrap();
        assert!(matches!(
            amplitude_histogram(&col, AmplitudePart::Real, Binning::default()),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn histogram_at_zero_is_a_spike() {
        let col = PropagatorColumn {
            t: 0.0,
            source: 0,
            entries: (0..200).map(|a| Complex64::new(if a == 0 { 1.0 } else { 0.0 }, 0.0)).collect(),
        };
        let h = amplitude_histogram(&col, AmplitudePart::Imag, Binning::default()).unwrap();
        assert_eq!(h.density.len(), 1);
        assert!(h.edges[0] < 0.0 && h.edges[1] > 0.0);
    }

    #[test]
    fn histogram_is_a_density() {
        let (_, s, _) = goe_setup(400, 5);
        let col = propagator_column(&s, 10, 2.0).unwrap();
        let h = amplitude_histogram(&col, AmplitudePart::Real, Binning::Count(20)).unwrap();
        let mass: f64 = h.density.iter().zip(h.edges.windows(2)).map(|(d, w)| d * (w[1] - w[0])).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(h.curvature > 0.0);
    }

    #[test]
    fn kurtosis_of_known_samples() {
        let uniform: Vec<f64> = (0..10000).map(|k| k as f64 / 9999.0).collect();
        let st = sample_stats(&uniform);
        assert!((st.excess_kurtosis + 1.2).abs() < 1e-3);
        assert!(st.ks_normal > 0.03);
    }

    #[test]
    fn strength_function_at_zero() {
        let (_, s, q) = goe_setup(40, 9);
        let col = propagator_column(&s, 7, 0.0).unwrap();
        let g = strength_function(&q, &col, 10, 5).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        let b = bin_index(&g.edges, q.values()[7]).unwrap();
        assert!((g.mass[b] - 1.0).abs() < 1e-12);
        assert_eq!(g.smoothed_q.len(), 39);
    }

    #[test]
    fn moving_average_of_constant() {
        assert_eq!(moving_average(&[2.0; 7], 3), vec![2.0; 7]);
        assert_eq!(moving_average(&[0.0, 3.0, 0.0], 3), vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn gradient_of_quadratic_is_exact_inside() {
        let x = [0.0, 0.5, 1.5, 2.0];
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let g = gradient(&x, &y);
        assert!((g[1] - 1.0).abs() < 1e-14 && (g[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn relaxation_matches_direct_evaluation() {
        let (h, s, q) = goe_setup(40, 12);
        let m = momentum_operator(&h, &q).unwrap();
        let lambda = crate::spectral::spectral_width(&h);
        let grid = [0.0, 0.5, 1.3];
        let opts = RelaxationOptions { momentum: true, finite_difference: true };
        let rec = relax(&s, &q, Some(&m), 11, &grid, lambda, opts).unwrap();
        assert_eq!(rec.channel("survival")[0], 1.0);
        assert_eq!(rec.channel("NPC")[0], 1.0);
        assert_eq!(rec.channel("P")[0], 0.0);
        let psi0 = WavePacket::basis_state(h.basis(), 40, 11).unwrap();
        for (j, &tau) in grid.iter().enumerate() {
            let psi = crate::spectral::evolve(&s, &psi0, tau / lambda).unwrap();
            assert!((rec.channel("Q")[j] - expectation_q(&q, &psi).unwrap()).abs() < 1e-12);
            assert!((rec.channel("dQ2")[j] - uncertainty_q(&q, &psi).unwrap()).abs() < 1e-12);
            assert!((rec.channel("P")[j] - m.expectation(&psi).unwrap() / lambda).abs() < 1e-12);
            assert!((rec.channel("P2")[j] - m.expectation_sq(&psi).unwrap() / lambda.powi(2)).abs() < 1e-12);
            let total = rec.channel("survival")[j] + rec.channel("sum_re2")[j] + rec.channel("sum_im2")[j];
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(rec.series.channel("P_fd").is_some());
    }

    #[test]
    fn relaxation_validates_inputs() {
        let (h, s, q) = goe_setup(10, 1);
        let opts = RelaxationOptions::default();
        assert!(relax(&s, &q, None, 0, &[0.0, 1.0], 1.0, opts).is_err());
        let m = momentum_operator(&h, &q).unwrap();
        assert!(matches!(relax(&s, &q, Some(&m), 10, &[0.0], 1.0, opts), Err(Error::IndexOutOfRange { .. })));
        let other = ObservableSpectrum::uniform_traceless(10, 1.0, "other").unwrap();
        assert!(matches!(relax(&s, &other, None, 0, &[0.0], 1.0, RelaxationOptions { momentum: false, ..opts }), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn mean_survival_matches_per_state_average() {
        let (_, s, _) = goe_setup(25, 4);
        let grid = [0.0, 0.7, 2.0];
        let mean = mean_survival(&s, &grid, 1.0).unwrap();
        for (j, &t) in grid.iter().enumerate() {
            let direct: f64 =
                (0..25).map(|a| propagator_column(&s, a, t).unwrap().survival_amplitude().norm_sqr()).sum::<f64>() / 25.0;
            assert!((mean[j] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_npc_of_single_state_matches_npc() {
        let (_, s, _) = goe_setup(25, 4);
        let grid = [0.0, 0.7, 2.0];
        let e = ensemble_npc(&s, &[3], &grid, 1.0).unwrap();
        for (j, &t) in grid.iter().enumerate() {
            let col = propagator_column(&s, 3, t).unwrap();
            assert!((e[j] - participation_number(&col.entries).unwrap()).abs() < 1e-9);
        }
    }
}
