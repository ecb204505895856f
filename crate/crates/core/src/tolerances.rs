//! Numerical tolerances used by runtime invariant checks.
//!
//! Every threshold lives here so a run configuration can override it in one
//! place (`tol.<name> = <value>` in a config file).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max elementwise |VᵀV - I| accepted from the eigensolver.
    pub orthogonality: f64,
    /// Max |H v - E v| per component, relative to the spectral width.
    pub eigen_residual: f64,
    /// Allowed deviation of a wave packet's norm² from 1.
    pub norm: f64,
    /// Relative asymmetry accepted by `diagonalize`.
    pub symmetry: f64,
    /// Relative asymmetry above which ingested matrices trigger a warning.
    pub ingest_asymmetry: f64,
    /// Fock-space weight allowed beyond the truncation for coherent states.
    pub coherent_leakage: f64,
    /// Allowed norm defect of a truncated coordinate eigenstate.
    pub squeezed_leakage: f64,
}

pub const ORTHOGONALITY: f64 = 1e-10;
pub const EIGEN_RESIDUAL: f64 = 1e-8;
pub const NORM: f64 = 1e-10;
pub const SYMMETRY: f64 = 1e-12;
pub const INGEST_ASYMMETRY: f64 = 1e-10;
pub const COHERENT_LEAKAGE: f64 = 1e-12;
pub const SQUEEZED_LEAKAGE: f64 = 1e-10;

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            orthogonality: ORTHOGONALITY,
            eigen_residual: EIGEN_RESIDUAL,
            norm: NORM,
            symmetry: SYMMETRY,
            ingest_asymmetry: INGEST_ASYMMETRY,
            coherent_leakage: COHERENT_LEAKAGE,
            squeezed_leakage: SQUEEZED_LEAKAGE,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Config(format!("tolerance `{name}` must be positive, got {value}")));
        }
        let slot = match name {
            "orthogonality" => &mut self.orthogonality,
            "eigen_residual" => &mut self.eigen_residual,
            "norm" => &mut self.norm,
            "symmetry" => &mut self.symmetry,
            "ingest_asymmetry" => &mut self.ingest_asymmetry,
            "coherent_leakage" => &mut self.coherent_leakage,
            "squeezed_leakage" => &mut self.squeezed_leakage,
            other => return Err(Error::Config(format!("unknown tolerance `{other}`"))),
        };
        *slot = value;
        Ok(())
    }
}
