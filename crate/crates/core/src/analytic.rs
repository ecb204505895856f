//! Closed-form reference curves for GOE dynamics in scaled time `τ = λt`.
//!
//! The survival amplitude of a basis state under a semicircular level density
//! is `f(τ) = J₁(2τ)/τ`; the observable, momentum and principal-component
//! curves below are all built from `f` and `f'`.
//!
//! Bessel functions use the ascending power series for arguments below
//! [`BESSEL_SWITCH`] and the Hankel asymptotic expansion above it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Argument at which Bessel evaluation switches from the power series to the
/// asymptotic expansion.
pub const BESSEL_SWITCH: f64 = 12.0;

/// `J_n(x) / (x/2)^n`, by its power series. Entire in `x`, so usable at 0.
fn bessel_reduced_series(n: u32, x: f64) -> f64 {
    let h2 = 0.25 * x * x;
    let mut term = 1.0;
    for k in 1..=n {
        term /= k as f64;
    }
    let mut sum = term;
    for k in 1..200u32 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel expansion `J_n(x) ≈ √(2/πx) (P cos χ - Q sin χ)`, `χ = x - nπ/2 - π/4`.
fn bessel_asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let (mut p, mut q) = (1.0, 0.0);
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60u32 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() >= last || a == 0.0 {
            break;
        }
        last = a.abs();
        // signs follow (+,-) pairs: k=1 → Q+, k=2 → P-, k=3 → Q-, k=4 → P+
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - n as f64 * FRAC_PI_2 - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Bessel function of the first kind of integer order.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < BESSEL_SWITCH {
        (0.5 * x).powi(n as i32) * bessel_reduced_series(n, x)
    } else {
        bessel_asymptotic(n, x)
    }
}

/// `f(τ) = J₁(2τ)/τ`, equal to 1 at `τ = 0`. Even in `τ`.
pub fn f_analytic(tau: f64) -> f64 {
    let t = tau.abs();
    if 2.0 * t < BESSEL_SWITCH {
        bessel_reduced_series(1, 2.0 * t)
    } else {
        bessel_j(1, 2.0 * t) / t
    }
}

/// `f'(τ) = -2 J₂(2τ)/τ`, equal to 0 at `τ = 0`. Odd in `τ`.
pub fn fprime_analytic(tau: f64) -> f64 {
    let t = tau.abs();
    let v = if 2.0 * t < BESSEL_SWITCH {
        -2.0 * t * bessel_reduced_series(2, 2.0 * t)
    } else {
        -2.0 * bessel_j(2, 2.0 * t) / t
    };
    if tau < 0.0 {
        -v
    } else {
        v
    }
}

/// `𝒩 · mean (Re f_a)²` over off-diagonal amplitudes.
pub fn real_part_variance(tau: f64) -> f64 {
    let f = f_analytic(tau);
    0.5 + 0.5 * f_analytic(2.0 * tau) - f * f
}

/// `𝒩 · mean (Im f_a)²` over off-diagonal amplitudes.
pub fn imag_part_variance(tau: f64) -> f64 {
    0.5 - 0.5 * f_analytic(2.0 * tau)
}

/// Principal-component number from the Gaussian-amplitude statistics,
/// `[f⁴ + (2 + 3f⁴ + f(2τ)² - 4f² - 2f² f(2τ)) / 𝒩]⁻¹`.
pub fn npc_analytic(tau: f64, dim: usize) -> f64 {
    let f = f_analytic(tau);
    let f2 = f * f;
    let g = f_analytic(2.0 * tau);
    let n = dim as f64;
    1.0 / (f2 * f2 + (2.0 + 3.0 * f2 * f2 + g * g - 4.0 * f2 - 2.0 * f2 * g) / n)
}

/// `[P² + 2/𝒩]⁻¹` for a survival probability `P`.
pub fn npc_from_survival(survival: f64, dim: usize) -> f64 {
    1.0 / (survival * survival + 2.0 / dim as f64)
}

/// `[|f|⁴ + 2/𝒩]⁻¹`.
pub fn npc_simplified(tau: f64, dim: usize) -> f64 {
    let f = f_analytic(tau);
    npc_from_survival(f * f, dim)
}

/// Infinite-dimension limit `|f|⁻⁴` (infinite at the zeros of `f`).
pub fn npc_limit(tau: f64) -> f64 {
    f_analytic(tau).powi(-4)
}

/// Short-time approximation `exp(2τ²)`.
pub fn npc_short_time(tau: f64) -> f64 {
    (2.0 * tau * tau).exp()
}

/// Envelope `1/(πτ³)` of the survival probability through its local maxima.
pub fn survival_envelope(tau: f64) -> f64 {
    1.0 / (PI * tau.powi(3))
}

/// Time scale `𝒩/λ` at which discreteness of the spectrum becomes visible.
pub fn weisskopf_time(dim: usize, lambda: f64) -> f64 {
    dim as f64 / lambda
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

/// Which reference curve a [`UniversalCurve`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UniversalFormula {
    /// `f(τ)`
    SurvivalAmplitude,
    /// `f'(τ)`
    SurvivalAmplitudeDerivative,
    /// `Q₀ f²`
    Observable,
    /// `Q₀²(f² - f⁴) + (1 - f²) Tr Q²/𝒩`
    ObservableVariance,
    /// `2 Q₀ f f'`
    Momentum,
    /// `Q₀²(f² + f'²) + (2 - f² - f'²) Tr Q²/𝒩`
    MomentumSquare,
    /// Full Gaussian-amplitude principal-component number.
    Npc,
    /// `[f⁴ + 2/𝒩]⁻¹`
    NpcSimplified,
    /// `exp(2τ²)`
    NpcShortTime,
    /// `1/(πτ³)`
    SurvivalEnvelope,
}

/// Parameters shared by the observable-dependent curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniversalParams {
    /// Initial observable value `Q₀ = Q_{a₀}`.
    pub q0: f64,
    pub dim: usize,
    /// `Tr Q² / 𝒩`.
    pub trq2_over_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniversalCurve {
    pub tau_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub formula: UniversalFormula,
}

fn universal_value(formula: UniversalFormula, tau: f64, p: &UniversalParams) -> f64 {
    let f = f_analytic(tau);
    let fp = fprime_analytic(tau);
    let (f2, fp2) = (f * f, fp * fp);
    match formula {
        UniversalFormula::SurvivalAmplitude => f,
        UniversalFormula::SurvivalAmplitudeDerivative => fp,
        UniversalFormula::Observable => p.q0 * f2,
        UniversalFormula::ObservableVariance => p.q0 * p.q0 * (f2 - f2 * f2) + (1.0 - f2) * p.trq2_over_n,
        UniversalFormula::Momentum => 2.0 * p.q0 * f * fp,
        UniversalFormula::MomentumSquare => p.q0 * p.q0 * (f2 + fp2) + (2.0 - f2 - fp2) * p.trq2_over_n,
        UniversalFormula::Npc => npc_analytic(tau, p.dim),
        UniversalFormula::NpcSimplified => npc_simplified(tau, p.dim),
        UniversalFormula::NpcShortTime => npc_short_time(tau),
        UniversalFormula::SurvivalEnvelope => survival_envelope(tau),
    }
}

pub fn universal_curve(formula: UniversalFormula, tau_grid: &[f64], params: &UniversalParams) -> UniversalCurve {
    UniversalCurve {
        tau_grid: tau_grid.to_vec(),
        values: tau_grid.iter().map(|&t| universal_value(formula, t, params)).collect(),
        formula,
    }
}

/// The analytic counterparts of the numeric relaxation channels, under the
/// same channel names: `survival`, `Q`, `dQ2`, `P`, `P2`, `NPC`.
pub fn universal_channels(tau_grid: &[f64], q0: f64, dim: usize, trq2_over_n: f64) -> Result<TimeSeries> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("dimension must be at least 2, got {dim}")));
    }
    let p = UniversalParams { q0, dim, trq2_over_n };
    let eval = |formula| universal_curve(formula, tau_grid, &p).values;
    let survival = tau_grid.iter().map(|&t| f_analytic(t).powi(2)).collect();
    TimeSeries::new("tau", tau_grid.to_vec())?
        .with("survival", survival)?
        .with("Q", eval(UniversalFormula::Observable))?
        .with("dQ2", eval(UniversalFormula::ObservableVariance))?
        .with("P", eval(UniversalFormula::Momentum))?
        .with("P2", eval(UniversalFormula::MomentumSquare))?
        .with("NPC", eval(UniversalFormula::Npc))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `J_n(x) = (1/2π) ∫ cos(nθ - x sin θ) dθ` by the periodic trapezoid
    /// rule, which converges geometrically.
    fn bessel_quadrature(n: u32, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        (0..m).map(|k| (n as f64 * k as f64 * h - x * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
    }

    /// Semicircle integrals with `ε = 2 cos θ`; returns `(f, f')`.
    fn semicircle_quadrature(tau: f64) -> (f64, f64) {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        let (mut f, mut fp) = (0.0, 0.0);
        for k in 0..m {
            let th = k as f64 * h;
            let eps = 2.0 * th.cos();
            let w = 4.0 * th.sin().powi(2);
            f += w * (eps * tau).cos();
            fp -= w * eps * (eps * tau).sin();
        }
        // full-period sum double-counts [0, π]
        (f * h / (4.0 * PI), fp * h / (4.0 * PI))
    }

    #[test]
    fn bessel_matches_quadrature() {
        for n in 0..=2 {
            let mut x = 0.0;
            while x <= 200.0 {
                let err = (bessel_j(n, x) - bessel_quadrature(n, x)).abs();
                assert!(err < 1e-10, "J_{n}({x}) off by {err:e}");
                x += 0.37;
            }
        }
    }

    #[test]
    fn bessel_continuous_at_switch() {
        for n in 0..=2 {
            let lo = bessel_j(n, BESSEL_SWITCH - 1e-12);
            let hi = bessel_j(n, BESSEL_SWITCH);
            assert!((lo - hi).abs() < 1e-10);
        }
    }

    #[test]
    fn bessel_agrees_with_libm() {
        for k in 0..400 {
            let x = 0.5 * k as f64;
            assert!((bessel_j(1, x) - libm::j1(x)).abs() < 1e-10);
            assert!((bessel_j(2, x) - libm::jn(2, x)).abs() < 1e-10);
        }
    }

    #[test]
    fn f_at_origin_and_roots() {
        assert_eq!(f_analytic(0.0), 1.0);
        assert_eq!(fprime_analytic(0.0), 0.0);
        for root in [1.91585, 3.50779, 5.08673] {
            assert!(f_analytic(root).abs() < 1e-4);
        }
    }

    #[test]
    fn f_matches_semicircle_integral() {
        for tau in [0.5, 1.0, 2.0, 5.0] {
            let (f, fp) = semicircle_quadrature(tau);
            assert!((f_analytic(tau) - f).abs() < 1e-8);
            assert!((fprime_analytic(tau) - fp).abs() < 1e-8);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-4;
        let fd = (f_analytic(1.0 + h) - f_analytic(1.0 - h)) / (2.0 * h);
        assert!((fd - fprime_analytic(1.0)).abs() < 1e-6);
    }

    #[test]
    fn f_is_bounded() {
        for k in 0..=10000 {
            assert!(f_analytic(k as f64 * 0.01).abs() <= 1.0);
        }
    }

    #[test]
    fn envelope_through_maxima() {
        let grid: Vec<f64> = (0..=20000).map(|k| 8.0 + k as f64 * 1e-4 * 4.0).collect();
        let p: Vec<f64> = grid.iter().map(|&t| f_analytic(t).powi(2)).collect();
        let maxima = local_maxima(&p);
        assert!(!maxima.is_empty());
        for i in maxima {
            let ratio = p[i] / survival_envelope(grid[i]);
            assert!((ratio - 1.0).abs() < 0.2, "τ={} ratio {ratio}", grid[i]);
        }
    }

    #[test]
    fn npc_reference_values() {
        for dim in [2, 10, 1000, 1_000_000] {
            assert!((npc_analytic(0.0, dim) - 1.0).abs() <= 4.0 / dim as f64);
        }
        let lim = npc_limit(1.0);
        assert!((lim - bessel_j(1, 2.0).powi(-4)).abs() < 1e-12);
        assert!((lim - 9.04).abs() < 0.01);
        let root = 1.9158529;
        assert!((npc_simplified(root, 2000) / 2000.0 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn simplified_npc_tracks_full_form() {
        for k in 0..=1000 {
            let tau = k as f64 * 0.01;
            let ratio = npc_analytic(tau, 1000) / npc_simplified(tau, 1000);
            assert!(ratio > 1.0 / 1.15 && ratio < 1.15, "τ={tau} ratio={ratio}");
        }
    }

    #[test]
    fn universal_channel_limits() {
        let grid: Vec<f64> = (0..=500).map(|k| k as f64 * 0.02).collect();
        let zero = universal_channels(&grid, 0.0, 100, 1.0).unwrap();
        assert!(zero.channel("Q").unwrap().iter().all(|&v| v == 0.0));
        assert!(zero.channel("P").unwrap().iter().all(|&v| v == 0.0));

        let p = UniversalParams { q0: -1.5, dim: 100, trq2_over_n: 1.0 };
        let q = universal_curve(UniversalFormula::Observable, &[1.91585], &p);
        assert!(q.values[0].abs() < 1e-8);
        let late = universal_curve(UniversalFormula::ObservableVariance, &[1e4], &p);
        assert!((late.values[0] - 1.0).abs() < 1e-6);
        assert!(universal_channels(&grid, 1.0, 1, 1.0).is_err());
    }
}
