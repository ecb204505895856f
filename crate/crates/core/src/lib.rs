//! Exact time evolution of observables in chaotic and regular quantum systems.

pub mod analytic;
pub mod boson;
pub mod error;
pub mod goe;
pub mod io;
pub mod observables;
pub mod operator;
pub mod oscillator;
pub mod series;
pub mod spectral;
pub mod tolerances;

pub use error::{Error, Result};
pub use operator::{HermitianOperator, COMPUTATIONAL_BASIS};
pub use series::TimeSeries;
pub use spectral::{Spectrum, WavePacket};
pub use tolerances::Tolerances;
