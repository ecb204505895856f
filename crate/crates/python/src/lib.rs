//! Python bindings for the qrelax core library.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qrelax::analytic;
use qrelax::boson::{enumerate_basis, BosonModelParams};
use qrelax::goe::{sample_goe, GoeParams};
use qrelax::io::matrix_file::{ingest_matrix, write_dense, DEFAULT_MAX_DIM};
use qrelax::io::{Mode, RunConfig};
use qrelax::observables::{
    mean_survival, momentum_operator, relax, static_npc, NpcTarget, ObservableSpectrum, RelaxationOptions,
};
use qrelax::oscillator::{coherent_dynamics, coherent_numeric, CoherentParams};
use qrelax::spectral::{diagonalize, spectral_width, state_widths};
use qrelax::{HermitianOperator, TimeSeries, COMPUTATIONAL_BASIS};

fn to_py(err: qrelax::Error) -> PyErr {
    use qrelax::Error as E;
    match err {
        E::Config(_) | E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::IndexOutOfRange { .. } => {
            PyValueError::new_err(err.to_string())
        }
        E::Io { .. } | E::Ingest { .. } => PyIOError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// A time series as `{"grid_name", "grid", "channels": {name: values}}`.
#[derive(IntoPyObject)]
struct Series {
    grid_name: String,
    grid: Vec<f64>,
    channels: BTreeMap<String, Vec<f64>>,
}

impl From<&TimeSeries> for Series {
    fn from(ts: &TimeSeries) -> Self {
        Series {
            grid_name: ts.grid_name().to_string(),
            grid: ts.grid().to_vec(),
            channels: ts.channels().iter().cloned().collect(),
        }
    }
}

/// Real symmetric Hamiltonian.
#[pyclass(name = "Hamiltonian", module = "qrelax")]
struct PyHamiltonian {
    inner: HermitianOperator,
}

#[pymethods]
impl PyHamiltonian {
    /// From a list of rows; must be symmetric within `tolerance`.
    #[new]
    #[pyo3(signature = (rows, tolerance = 1e-12))]
    fn new(rows: Vec<Vec<f64>>, tolerance: f64) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let inner = HermitianOperator::from_row_major(n, &flat, COMPUTATIONAL_BASIS, tolerance).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// A GOE sample of width `lam`.
    #[staticmethod]
    #[pyo3(signature = (dim, lam = 1.0, seed = 42))]
    fn goe(dim: usize, lam: f64, seed: u64) -> PyResult<Self> {
        let inner = sample_goe(&GoeParams::new(dim, lam, seed).map_err(to_py)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Reads a matrix file, symmetrizing it if needed.
    #[staticmethod]
    #[pyo3(signature = (path, max_dim = DEFAULT_MAX_DIM))]
    fn read(path: PathBuf, max_dim: u64) -> PyResult<Self> {
        Ok(Self { inner: ingest_matrix(&path, 1e-12, max_dim).map_err(to_py)? })
    }

    /// Writes a dense symmetric matrix file.
    fn write(&self, path: PathBuf) -> PyResult<()> {
        write_dense(&path, &self.inner, true).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.inner.dim();
        (0..n).map(|i| (0..n).map(|j| self.inner.get(i, j)).collect()).collect()
    }

    fn spectral_width(&self) -> f64 {
        spectral_width(&self.inner)
    }

    fn state_widths(&self) -> Vec<f64> {
        state_widths(&self.inner)
    }

    fn diagonalize(&self, py: Python<'_>) -> PyResult<PySystem> {
        let h = self.inner.clone();
        let spec = py.detach(|| diagonalize(&h)).map_err(to_py)?;
        Ok(PySystem { lambda: spectral_width(&h), h, spec })
    }
}

/// A diagonalized Hamiltonian, ready for time evolution.
#[pyclass(name = "System", module = "qrelax")]
struct PySystem {
    h: HermitianOperator,
    spec: qrelax::Spectrum,
    lambda: f64,
}

#[pymethods]
impl PySystem {
    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.spec.energies().to_vec()
    }

    #[getter]
    fn spectral_width(&self) -> f64 {
        self.lambda
    }

    /// Relaxation of basis state `initial` for an observable diagonal in the
    /// basis of the Hamiltonian, on a grid of scaled times.
    #[pyo3(signature = (q_values, initial, tau_grid, momentum = true))]
    fn relax(&self, py: Python<'_>, q_values: Vec<f64>, initial: usize, tau_grid: Vec<f64>, momentum: bool) -> PyResult<Series> {
        let q = ObservableSpectrum::new(q_values, self.h.basis()).map_err(to_py)?;
        let record = py
            .detach(|| {
                let m = if momentum { Some(momentum_operator(&self.h, &q)?) } else { None };
                let options = RelaxationOptions { momentum, finite_difference: false };
                relax(&self.spec, &q, m.as_ref(), initial, &tau_grid, self.lambda, options)
            })
            .map_err(to_py)?;
        Ok(Series::from(&record.series))
    }

    /// Survival probability averaged over every basis state.
    fn mean_survival(&self, py: Python<'_>, tau_grid: Vec<f64>) -> PyResult<Vec<f64>> {
        py.detach(|| mean_survival(&self.spec, &tau_grid, self.lambda)).map_err(to_py)
    }

    /// Participation number of eigenvector `k` in the Hamiltonian's basis.
    fn eigenvector_npc(&self, k: usize) -> PyResult<f64> {
        static_npc(&self.spec, NpcTarget::Eigenvector(k)).map_err(to_py)
    }

    /// Participation number of a complex vector expanded in the eigenbasis.
    fn vector_npc(&self, re: Vec<f64>, im: Vec<f64>) -> PyResult<f64> {
        if re.len() != im.len() {
            return Err(PyValueError::new_err("real and imaginary parts differ in length"));
        }
        let v: Vec<Complex64> = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        static_npc(&self.spec, NpcTarget::Vector(&v)).map_err(to_py)
    }
}

/// `f(τ) = J₁(2τ)/τ`.
#[pyfunction]
fn survival_amplitude(tau: f64) -> f64 {
    analytic::f_analytic(tau)
}

#[pyfunction]
fn bessel_j(n: u32, x: f64) -> f64 {
    analytic::bessel_j(n, x)
}

#[pyfunction]
fn npc_analytic(tau: f64, dim: usize) -> f64 {
    analytic::npc_analytic(tau, dim)
}

/// Analytic survival, Q, dQ2, P, P2 and NPC curves for chaotic relaxation.
#[pyfunction]
fn universal_channels(tau_grid: Vec<f64>, q0: f64, dim: usize, trq2_over_n: f64) -> PyResult<Series> {
    Ok(Series::from(&analytic::universal_channels(&tau_grid, q0, dim, trq2_over_n).map_err(to_py)?))
}

/// Occupation vectors of `n_bosons` bosons on `n_levels` levels.
#[pyfunction]
fn boson_basis(n_bosons: usize, n_levels: usize) -> PyResult<Vec<Vec<u16>>> {
    let p = BosonModelParams { n_bosons, n_levels, ..BosonModelParams::default() };
    Ok(enumerate_basis(&p).map_err(to_py)?.states().to_vec())
}

/// Coherent-state dynamics: `(numeric, closed_form)` on a grid of `ωt`.
#[pyfunction]
#[pyo3(signature = (alpha_re, alpha_im, omega, n_max, tau_grid))]
fn coherent_state(alpha_re: f64, alpha_im: f64, omega: f64, n_max: usize, tau_grid: Vec<f64>) -> PyResult<(Series, Series)> {
    let p = CoherentParams::new(Complex64::new(alpha_re, alpha_im), omega, n_max).map_err(to_py)?;
    let num = coherent_numeric(&p, &tau_grid).map_err(to_py)?;
    let exact = coherent_dynamics(&p, &tau_grid).map_err(to_py)?;
    Ok((Series::from(&num), Series::from(&exact)))
}

/// Runs a full simulation as the command-line tool would, without writing
/// files. `options` uses the configuration-file keys (e.g. `{"dim": 500}`).
/// Returns the series and the metadata as a JSON string.
#[pyfunction]
#[pyo3(signature = (mode, options = None))]
fn run(py: Python<'_>, mode: &str, options: Option<BTreeMap<String, Bound<'_, PyAny>>>) -> PyResult<(Series, String)> {
    let mode: Mode = mode.parse().map_err(to_py)?;
    let mut config = RunConfig::new(mode);
    config.deterministic = true;
    for (key, value) in options.unwrap_or_default() {
        let text = value.str()?.to_string();
        let text = match text.as_str() {
            "True" => "true".to_string(),
            "False" => "false".to_string(),
            _ => text,
        };
        config.apply(&key, &text).map_err(to_py)?;
    }
    config.out = None;
    let out = py.detach(|| qrelax::io::run(&config)).map_err(to_py)?;
    Ok((Series::from(&out.series), out.metadata.to_json()))
}

#[pymodule]
#[pyo3(name = "qrelax")]
fn qrelax_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(survival_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j, m)?)?;
    m.add_function(wrap_pyfunction!(npc_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(universal_channels, m)?)?;
    m.add_function(wrap_pyfunction!(boson_basis, m)?)?;
    m.add_function(wrap_pyfunction!(coherent_state, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
