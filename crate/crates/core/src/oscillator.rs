//! Harmonic oscillator reference dynamics.
//!
//! Conventions: `H = ω(c†c + ½)`, `Q = (c + c†)/√(2ω)`, `P = i√(ω/2)(c† - c)`,
//! so that `P = dQ/dt`. Time grids are in the phase `τ = ωt`.
//!
//! Moments of truncated Fock-space states are evaluated with the untruncated
//! ladder operators acting on the (zero-padded) truncated vector, so they are
//! exact expectation values of a physical state and respect the uncertainty
//! bound.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::tolerances::Tolerances;

/// Coherent state `c|α⟩ = α|α⟩` truncated to `n ≤ n_max` quanta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentParams {
    pub alpha: Complex64,
    pub omega: f64,
    pub n_max: usize,
}

impl CoherentParams {
    pub fn new(alpha: Complex64, omega: f64, n_max: usize) -> Result<Self> {
        let p = Self { alpha, omega, n_max };
        p.validate()?;
        Ok(p)
    }

    /// Smallest truncation satisfying `n_max ≥ |α|² + 10√(|α|² + 1)`.
    pub fn recommended_n_max(alpha: Complex64) -> usize {
        let a2 = alpha.norm_sqr();
        (a2 + 10.0 * (a2 + 1.0).sqrt()).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        check_omega(self.omega)?;
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return Err(Error::InvalidParameter("coherent amplitude must be finite".into()));
        }
        Ok(())
    }

    /// Weight `Σ_{n > n_max} |a_n|²` discarded by the truncation.
    pub fn leakage(&self) -> f64 {
        let a2 = self.alpha.norm_sqr();
        if a2 == 0.0 {
            return 0.0;
        }
        let ln_a2 = a2.ln();
        let mut ln_fact: f64 = (1..=self.n_max + 1).map(|k| (k as f64).ln()).sum();
        let mut tail = 0.0;
        let mut n = self.n_max + 1;
        loop {
            let term = (-a2 + n as f64 * ln_a2 - ln_fact).exp();
            tail += term;
            if (n as f64 > a2 && term < 1e-30 * tail.max(1e-300)) || n > self.n_max + 100_000 {
                break;
            }
            n += 1;
            ln_fact += (n as f64).ln();
        }
        tail
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {omega}")));
    }
    Ok(())
}

/// `a_n = e^{-|α|²/2} αⁿ/√(n!)` for `n = 0..=n_max`, with the factorial taken
/// in log space.
pub fn coherent_amplitudes(alpha: Complex64, n_max: usize) -> Vec<Complex64> {
    let a2 = alpha.norm_sqr();
    let mut out = Vec::with_capacity(n_max + 1);
    if a2 == 0.0 {
        out.push(Complex64::new(1.0, 0.0));
        out.resize(n_max + 1, Complex64::new(0.0, 0.0));
        return out;
    }
    let (r, phi) = (alpha.norm(), alpha.arg());
    let mut ln_fact = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let modulus = (-0.5 * a2 + n as f64 * r.ln() - 0.5 * ln_fact).exp();
        out.push(Complex64::from_polar(modulus, n as f64 * phi));
    }
    out
}

/// Closed-form coherent-state channels on a grid of `τ = ωt`:
/// `Q`, `P`, `dQ2`, `dP2`, `cov`, `survival`.
pub fn coherent_dynamics(p: &CoherentParams, tau_grid: &[f64]) -> Result<TimeSeries> {
    p.validate()?;
    let w = p.omega;
    let mut ch: [Vec<f64>; 6] = Default::default();
    for &tau in tau_grid {
        let a = p.alpha * Complex64::from_polar(1.0, -tau);
        ch[0].push((2.0 / w).sqrt() * a.re);
        ch[1].push((2.0 * w).sqrt() * a.im);
        ch[2].push(0.5 / w);
        ch[3].push(0.5 * w);
        ch[4].push(0.0);
        ch[5].push((-4.0 * p.alpha.norm_sqr() * (0.5 * tau).sin().powi(2)).exp());
    }
    assemble(tau_grid, ch)
}

/// Coherent-state channels from the truncated Fock expansion evolved with
/// `E_n = ω(n + ½)`.
pub fn coherent_numeric(p: &CoherentParams, tau_grid: &[f64]) -> Result<TimeSeries> {
    coherent_numeric_with(p, tau_grid, &Tolerances::default())
}

pub fn coherent_numeric_with(p: &CoherentParams, tau_grid: &[f64], tol: &Tolerances) -> Result<TimeSeries> {
    p.validate()?;
    let leakage = p.leakage();
    if leakage > tol.coherent_leakage {
        return Err(Error::Leakage { leakage, threshold: tol.coherent_leakage });
    }
    let amps = normalize(coherent_amplitudes(p.alpha, p.n_max))?;
    fock_dynamics(&amps, p.omega, tau_grid)
}

/// Coordinate eigenstate `Q|a⟩ = a|a⟩` regularized by truncating its Fock
/// expansion at `n_max` and renormalizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedParams {
    pub a_position: f64,
    pub omega: f64,
    pub n_max: usize,
}

impl SqueezedParams {
    pub fn new(a_position: f64, omega: f64, n_max: usize) -> Result<Self> {
        let p = Self { a_position, omega, n_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_omega(self.omega)?;
        if !self.a_position.is_finite() {
            return Err(Error::InvalidParameter("coordinate eigenvalue must be finite".into()));
        }
        Ok(())
    }
}

/// Normalized truncated amplitudes `⟨n|a⟩ ∝ φ_n(√ω a)` with `φ_n` the Hermite
/// functions, from the three-term recurrence.
pub fn squeezed_amplitudes(p: &SqueezedParams) -> Result<Vec<Complex64>> {
    p.validate()?;
    let xi = p.omega.sqrt() * p.a_position;
    let mut phi = Vec::with_capacity(p.n_max + 1);
    phi.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp());
    if p.n_max >= 1 {
        phi.push(std::f64::consts::SQRT_2 * xi * phi[0]);
    }
    for n in 1..p.n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * xi * phi[n] - (nf / (nf + 1.0)).sqrt() * phi[n - 1];
        phi.push(next);
    }
    normalize(phi.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// Truncated coordinate-eigenstate channels on a grid of `τ = ωt`: `Q`, `P`,
/// `dQ2`, `dP2`, `cov`, `survival`.
pub fn squeezed_dynamics(p: &SqueezedParams, tau_grid: &[f64]) -> Result<TimeSeries> {
    squeezed_dynamics_with(p, tau_grid, &Tolerances::default())
}

pub fn squeezed_dynamics_with(p: &SqueezedParams, tau_grid: &[f64], tol: &Tolerances) -> Result<TimeSeries> {
    let amps = squeezed_amplitudes(p)?;
    let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > tol.squeezed_leakage {
        return Err(Error::Leakage { leakage: (norm - 1.0).abs(), threshold: tol.squeezed_leakage });
    }
    fock_dynamics(&amps, p.omega, tau_grid)
}

fn normalize(mut amps: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::ZeroVector);
    }
    for z in &mut amps {
        *z /= norm;
    }
    Ok(amps)
}

/// Ladder-operator moments of a Fock-space vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockMoments {
    pub q: f64,
    pub p: f64,
    pub dq2: f64,
    pub dp2: f64,
    pub cov: f64,
}

pub fn fock_moments(amps: &[Complex64], omega: f64) -> FockMoments {
    let mut c1 = Complex64::new(0.0, 0.0);
    let mut c2 = Complex64::new(0.0, 0.0);
    let mut number = 0.0;
    for (n, a) in amps.iter().enumerate() {
        let nf = n as f64;
        number += nf * a.norm_sqr();
        if let Some(b) = amps.get(n + 1) {
            c1 += a.conj() * b * (nf + 1.0).sqrt();
        }
        if let Some(b) = amps.get(n + 2) {
            c2 += a.conj() * b * ((nf + 1.0) * (nf + 2.0)).sqrt();
        }
    }
    let q = (2.0 / omega).sqrt() * c1.re;
    let p = (2.0 * omega).sqrt() * c1.im;
    let q2 = (2.0 * c2.re + 2.0 * number + 1.0) / (2.0 * omega);
    let p2 = 0.5 * omega * (2.0 * number + 1.0 - 2.0 * c2.re);
    FockMoments { q, p, dq2: q2 - q * q, dp2: p2 - p * p, cov: c2.im - q * p }
}

fn fock_dynamics(amps: &[Complex64], omega: f64, tau_grid: &[f64]) -> Result<TimeSeries> {
    let mut ch: [Vec<f64>; 6] = Default::default();
    let mut evolved = amps.to_vec();
    for &tau in tau_grid {
        // the zero-point phase e^{-iωt/2} is global and dropped
        let mut overlap = Complex64::new(0.0, 0.0);
        for (n, (e, a)) in evolved.iter_mut().zip(amps).enumerate() {
            *e = a * Complex64::from_polar(1.0, -(n as f64) * tau);
            overlap += a.conj() * *e;
        }
        let m = fock_moments(&evolved, omega);
        ch[0].push(m.q);
        ch[1].push(m.p);
        ch[2].push(m.dq2);
        ch[3].push(m.dp2);
        ch[4].push(m.cov);
        ch[5].push(overlap.norm_sqr());
    }
    assemble(tau_grid, ch)
}

fn assemble(tau_grid: &[f64], ch: [Vec<f64>; 6]) -> Result<TimeSeries> {
    let [q, p, dq2, dp2, cov, survival] = ch;
    TimeSeries::new("tau", tau_grid.to_vec())?
        .with("Q", q)?
        .with("P", p)?
        .with("dQ2", dq2)?
        .with("dP2", dp2)?
        .with("cov", cov)?
        .with("survival", survival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Vec<f64> {
        crate::series::uniform_grid(4.0 * PI, 401).unwrap()
    }

    #[test]
    fn real_alpha_at_start() {
        let p = CoherentParams::new(Complex64::new(1.3, 0.0), 2.0, 60).unwrap();
        let ts = coherent_dynamics(&p, &[0.0, 1.0]).unwrap();
        assert!((ts.channel("Q").unwrap()[0] - 1.3).abs() < 1e-15);
        assert_eq!(ts.channel("P").unwrap()[0], 0.0);
    }

    #[test]
    fn survival_is_periodic() {
        let p = CoherentParams::new(Complex64::new(0.7, 0.4), 1.0, 40).unwrap();
        let ts = coherent_dynamics(&p, &[0.0, 2.0 * PI]).unwrap();
        assert!((ts.channel("survival").unwrap()[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn survival_at_half_period_from_fock_overlap() {
        let p = CoherentParams::new(Complex64::new(1.0, 0.0), 1.0, 40).unwrap();
        let amps = coherent_amplitudes(p.alpha, p.n_max);
        let overlap: Complex64 =
            amps.iter().enumerate().map(|(n, a)| a.conj() * a * Complex64::from_polar(1.0, -(n as f64) * PI)).sum();
        assert!((overlap.norm_sqr() - (-4.0f64).exp()).abs() < 1e-12);
        let ts = coherent_dynamics(&p, &[0.0, PI]).unwrap();
        assert!((ts.channel("survival").unwrap()[1] - 1.8316e-2).abs() < 1e-6);
    }

    #[test]
    fn numeric_matches_closed_form() {
        let p = CoherentParams::new(Complex64::new(1.0, 0.0), 1.0, 40).unwrap();
        let g = grid();
        let exact = coherent_dynamics(&p, &g).unwrap();
        let num = coherent_numeric(&p, &g).unwrap();
        for name in ["Q", "P", "dQ2", "dP2", "cov", "survival"] {
            for (a, b) in exact.channel(name).unwrap().iter().zip(num.channel(name).unwrap()) {
                assert!((a - b).abs() < 1e-8, "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn leakage_rejected() {
        let p = CoherentParams::new(Complex64::new(3.0, 0.0), 1.0, 10).unwrap();
        assert!(p.leakage() > 1e-3);
        assert!(matches!(coherent_numeric(&p, &[0.0, 1.0]), Err(Error::Leakage { .. })));
        assert!(CoherentParams::recommended_n_max(Complex64::new(1.0, 0.0)) <= 40);
    }

    #[test]
    fn large_truncation_does_not_overflow() {
        let amps = coherent_amplitudes(Complex64::new(15.0, 0.0), 400);
        assert!(amps.iter().all(|z| z.re.is_finite()));
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezed_origin_is_centered() {
        let p = SqueezedParams::new(0.0, 1.0, 200).unwrap();
        let ts = squeezed_dynamics(&p, &[0.0]).unwrap();
        assert!(ts.channel("Q").unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn squeezed_follows_classical_motion() {
        let p = SqueezedParams::new(1.2, 1.5, 200).unwrap();
        let g = grid();
        let ts = squeezed_dynamics(&p, &g).unwrap();
        let q = ts.channel("Q").unwrap();
        let pm = ts.channel("P").unwrap();
        for (k, &tau) in g.iter().enumerate() {
            assert!((q[k] - q[0] * tau.cos()).abs() < 1e-6);
            assert!((pm[k] + p.omega * q[0] * tau.sin()).abs() < 1e-6);
        }
        assert!((q[0] - 1.2).abs() < 0.1);
    }

    #[test]
    fn squeezed_survival_sharpens_with_truncation() {
        let quarter = [std::f64::consts::FRAC_PI_2];
        let values: Vec<f64> = [50, 100, 200, 400]
            .iter()
            .map(|&n| {
                let p = SqueezedParams::new(1.0, 1.0, n).unwrap();
                squeezed_dynamics(&p, &quarter).unwrap().channel("survival").unwrap()[0]
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn uncertainty_bound_holds() {
        let g = grid();
        let sq = squeezed_dynamics(&SqueezedParams::new(0.8, 1.0, 120).unwrap(), &g).unwrap();
        let co = coherent_numeric(&CoherentParams::new(Complex64::new(0.5, -1.0), 0.7, 60).unwrap(), &g).unwrap();
        for ts in [sq, co] {
            for (a, b) in ts.channel("dQ2").unwrap().iter().zip(ts.channel("dP2").unwrap()) {
                assert!((a * b).sqrt() >= 0.5 - 1e-12);
            }
        }
    }
}
