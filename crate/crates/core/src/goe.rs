//! Gaussian Orthogonal Ensemble sampling.
//!
//! Entries are drawn so the level density is a semicircle of radius `2λ`:
//! off-diagonal elements have variance `λ²/N`, diagonal elements `2λ²/N`.
//!
//! The random stream is ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`, consumed in row-major order over the upper triangle
//! (`i` outer, `j ≥ i` inner), one standard normal per entry. ChaCha20 is a
//! counter-based generator, so a given `(dim, lambda, seed)` reproduces the
//! same matrix on every platform.

use std::f64::consts::PI;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, COMPUTATIONAL_BASIS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoeParams {
    pub dim: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl GoeParams {
    pub fn new(dim: usize, lambda: f64, seed: u64) -> Result<Self> {
        let params = Self { dim, lambda, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("GOE dimension must be at least 1".into()));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "GOE energy scale must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Deterministic generator used for every random draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn sample_goe(params: &GoeParams) -> Result<HermitianOperator> {
    params.validate()?;
    let n = params.dim;
    let mut rng = rng_from_seed(params.seed);
    let off_sd = 1.0 / (n as f64).sqrt();
    let diag_sd = std::f64::consts::SQRT_2 / (n as f64).sqrt();
    let mut m = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let unit = if i == j { z * diag_sd } else { z * off_sd };
            let x = params.lambda * unit;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    HermitianOperator::new(m, COMPUTATIONAL_BASIS, 0.0)
}

/// Wigner semicircle density of radius `2λ`, normalized to one.
pub fn semicircle_density(energy: f64, lambda: f64) -> f64 {
    let r2 = 4.0 * lambda * lambda - energy * energy;
    if r2 <= 0.0 {
        0.0
    } else {
        r2.sqrt() / (2.0 * PI * lambda * lambda)
    }
}

/// Fraction of probability mass of the semicircle in `[lo, hi]`.
pub fn semicircle_mass(lo: f64, hi: f64, lambda: f64) -> f64 {
    // antiderivative of the unit semicircle in x = E / (2λ)
    let cdf = |e: f64| {
        let x = (e / (2.0 * lambda)).clamp(-1.0, 1.0);
        0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI
    };
    cdf(hi) - cdf(lo)
}
