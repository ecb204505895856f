//! End-to-end runs for each mode.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;

use crate::analytic::{universal_channels, weisskopf_time};
use crate::boson::{BosonModel, BosonModelParams};
use crate::error::{Error, Result};
use crate::goe::{sample_goe, GoeParams};
use crate::io::config::{Mode, OscillatorState, RunConfig};
use crate::io::matrix_file::{ingest_matrix, upper_triangle_entries, write_coordinate};
use crate::io::output::{companion_path, series_to_json, write_series, Metadata, OutputFormat};
use crate::observables::{
    amplitude_histogram, momentum_operator, relax, strength_function, AmplitudePart, Binning, ObservableSpectrum,
    RelaxationOptions,
};
use crate::operator::{HermitianOperator, COMPUTATIONAL_BASIS};
use crate::oscillator::{coherent_dynamics, coherent_numeric_with, squeezed_dynamics_with, CoherentParams, SqueezedParams};
use crate::series::TimeSeries;
use crate::spectral::{diagonal_variance, diagonalize_with, propagator_column, spectral_width, state_widths};

/// Basis label of operators re-expressed in the observable eigenbasis.
pub const OBSERVABLE_BASIS: &str = "observable";

/// An auxiliary output such as a histogram, written next to the main file.
#[derive(Debug, Clone, PartialEq)]
pub struct Companion {
    pub tag: String,
    pub series: TimeSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub metadata: Metadata,
    pub companions: Vec<Companion>,
}

/// Computes a run without writing anything.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut out = match config.mode {
        Mode::Goe => run_goe(config),
        Mode::Boson => run_boson(config),
        Mode::Oscillator => run_oscillator(config),
        Mode::External => run_external(config),
    }?;
    out.metadata.stamp(config.deterministic);
    Ok(out)
}

/// Computes a run and writes its outputs: to `config.out` (plus companions
/// and, for CSV, a metadata sidecar) or, without an output path, the main
/// series to standard output.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    let output = run(config)?;
    match &config.out {
        Some(path) => {
            write_series(path, &output.series, &output.metadata, config.format)?;
            for c in &output.companions {
                let p = companion_path(path, &c.tag, config.format);
                match config.format {
                    OutputFormat::Csv => crate::io::output::write_atomic(&p, c.series.to_csv_string().as_bytes())?,
                    OutputFormat::Json => {
                        crate::io::output::write_atomic(&p, series_to_json(&c.series, &output.metadata).as_bytes())?
                    }
                }
            }
        }
        None => {
            let text = match config.format {
                OutputFormat::Csv => output.series.to_csv_string(),
                OutputFormat::Json => series_to_json(&output.series, &output.metadata),
            };
            std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(output)
}

/// Joins per-initial-state series; with more than one, every channel gets an
/// `_a<index>` suffix.
fn combine(parts: Vec<(usize, TimeSeries)>) -> Result<TimeSeries> {
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().expect("one part").1);
    }
    let mut out = TimeSeries::new(parts[0].1.grid_name(), parts[0].1.grid().to_vec())?;
    for (idx, s) in &parts {
        out.merge_suffixed(s, &format!("_a{idx}"))?;
    }
    Ok(out)
}

/// Relaxation of each selected initial state of `h`, which must be written
/// in the eigenbasis of `q`.
fn relax_all(
    h: &HermitianOperator,
    q: &ObservableSpectrum,
    config: &RunConfig,
    grid: &[f64],
    meta: &mut Metadata,
    analytic: bool,
) -> Result<(TimeSeries, Vec<Companion>)> {
    let tol = &config.tolerances;
    let spec = diagonalize_with(h, tol)?;
    let lambda = spectral_width(h);
    let momentum = momentum_operator(h, q)?;
    let options = RelaxationOptions { momentum: true, finite_difference: config.debug };
    let widths = state_widths(h);
    let mut parts = Vec::new();
    let mut companions = Vec::new();
    for sel in &config.initial {
        let a0 = sel.resolve(q)?;
        let record = relax(&spec, q, Some(&momentum), a0, grid, lambda, options)?;
        let mut series = record.series;
        if analytic {
            let twins = universal_channels(grid, record.q0, h.dim(), q.trq2_over_n())?;
            series.merge_suffixed(&twins, "_analytic")?;
        }
        meta.lambda_a.insert(a0, widths[a0]);
        if config.mode == Mode::External {
            for &tau in &config.snapshot_taus {
                let col = propagator_column(&spec, a0, tau / lambda)?;
                let g = strength_function(q, &col, config.strength_bins, config.strength_window)?;
                companions.push(Companion { tag: format!("strength_a{a0}_tau{tau}"), series: g.to_series()? });
                let binning = config.histogram_bins.map(Binning::Count).unwrap_or_default();
                for (part, name) in [(AmplitudePart::Real, "real"), (AmplitudePart::Imag, "imag")] {
                    match amplitude_histogram(&col, part, binning) {
                        Ok(hist) => {
                            meta.set(&format!("excess_kurtosis_{name}_a{a0}_tau{tau}"), hist.stats.excess_kurtosis);
                            companions.push(Companion { tag: format!("hist_{name}_a{a0}_tau{tau}"), series: hist.to_series()? });
                        }
                        Err(Error::TooFewSamples { found, .. }) => {
                            log::warn!("skipping amplitude histogram: only {found} off-diagonal amplitudes");
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        parts.push((a0, series));
    }
    meta.lambda = lambda;
    meta.set("weisskopf_time", weisskopf_time(h.dim(), lambda));
    meta.set("trq2_over_n", q.trq2_over_n());
    Ok((combine(parts)?, companions))
}

fn run_goe(config: &RunConfig) -> Result<RunOutput> {
    let grid = config.tau_grid()?;
    let mut meta = Metadata::new("goe", config.seed, config.dim, 0.0);
    let mut total: Option<TimeSeries> = None;
    let mut lambda_sum = 0.0;
    for r in 0..config.realizations {
        let seed = config.seed.wrapping_add(r as u64);
        let h = sample_goe(&GoeParams::new(config.dim, config.lambda, seed)?)?;
        let q = ObservableSpectrum::uniform_traceless(config.dim, config.q_scale, h.basis())?;
        let (series, _) = relax_all(&h, &q, config, &grid, &mut meta, true)?;
        lambda_sum += meta.lambda;
        total = Some(match total {
            None => series,
            Some(mut acc) => {
                let names: Vec<String> = acc.channel_names().map(str::to_string).collect();
                for name in names {
                    let sum: Vec<f64> = acc.channel(&name).expect("present").iter().zip(series.channel(&name).expect("same layout")).map(|(a, b)| a + b).collect();
                    acc.insert(name, sum)?;
                }
                acc
            }
        });
    }
    let mut series = total.expect("at least one realization");
    if config.realizations > 1 {
        let k = config.realizations as f64;
        let names: Vec<String> = series.channel_names().map(str::to_string).collect();
        for name in names {
            let mean = series.channel(&name).expect("present").iter().map(|v| v / k).collect();
            series.insert(name, mean)?;
        }
        meta.set("realizations", config.realizations);
    }
    meta.lambda = lambda_sum / config.realizations as f64;
    Ok(RunOutput { series, metadata: meta, companions: Vec::new() })
}

/// Eigen-decomposition of an observable with values ascending; returns the
/// rotation (columns are eigenvectors) and the eigenvalues.
pub fn observable_eigenbasis(q: &HermitianOperator, config: &RunConfig) -> Result<(Mat<f64>, ObservableSpectrum)> {
    let spec = diagonalize_with(q, &config.tolerances)?;
    let values = ObservableSpectrum::new(spec.energies().to_vec(), OBSERVABLE_BASIS)?;
    Ok((spec.vectors().to_owned(), values))
}

/// Hamiltonian and observable of an external run, both in the observable
/// eigenbasis.
pub fn external_inputs(config: &RunConfig) -> Result<(HermitianOperator, ObservableSpectrum)> {
    let tol = &config.tolerances;
    let h_path = config.hamiltonian_file.as_ref().ok_or_else(|| Error::Config("external mode requires --hamiltonian-file".into()))?;
    let h = ingest_matrix(h_path, tol.ingest_asymmetry, config.max_ingest_dim)?;
    match &config.observable_file {
        Some(q_path) => {
            let q_op = ingest_matrix(q_path, tol.ingest_asymmetry, config.max_ingest_dim)?;
            if q_op.dim() != h.dim() {
                return Err(Error::DimensionMismatch { expected: h.dim(), found: q_op.dim() });
            }
            let (u, q) = observable_eigenbasis(&q_op, config)?;
            let rotated = h.rotated(u.as_ref(), OBSERVABLE_BASIS)?;
            Ok((rotated, q))
        }
        None => {
            let q = ObservableSpectrum::uniform_traceless(h.dim(), config.q_scale, OBSERVABLE_BASIS)?;
            Ok((h.with_basis(OBSERVABLE_BASIS), q))
        }
    }
}

fn run_external(config: &RunConfig) -> Result<RunOutput> {
    let grid = config.tau_grid()?;
    let (h, q) = external_inputs(config)?;
    let n = h.dim();
    let mut meta = Metadata::new("external", config.seed, n, 0.0);
    let lambda = spectral_width(&h);
    let widths = state_widths(&h);
    let var_diag = diagonal_variance(&h);
    let mean_width_sq = widths.iter().map(|w| w * w).sum::<f64>() / n as f64;
    let residual = (mean_width_sq - (lambda * lambda - var_diag)).abs();
    if residual > 1e-10 * (lambda * lambda).max(1.0) {
        log::warn!("width identity residual {residual:e} exceeds 1e-10");
    }
    meta.set("var_h_diag", var_diag);
    meta.set("mean_lambda_a_sq", mean_width_sq);
    meta.set("width_identity_residual", residual);
    let (series, companions) = relax_all(&h, &q, config, &grid, &mut meta, false)?;
    let widths_series = TimeSeries::new("a", (0..n).map(|a| a as f64).collect())?
        .with("Q", q.values().to_vec())?
        .with("H_aa", h.diagonal())?
        .with("lambda_a", widths)?;
    let mut companions = companions;
    companions.push(Companion { tag: "widths".into(), series: widths_series });
    Ok(RunOutput { series, metadata: meta, companions })
}

fn run_boson(config: &RunConfig) -> Result<RunOutput> {
    let grid = config.tau_grid()?;
    let p = BosonModelParams { n_bosons: config.n_bosons, n_levels: config.n_levels, v: config.v, seed: config.seed };
    let model = BosonModel::build_with(&p, config.dimension_cap, &config.tolerances)?;
    if let Some(path) = &config.export_hamiltonian {
        write_coordinate(path, model.dim(), &upper_triangle_entries(&model.hamiltonian), true)?;
    }
    let q = model.observable()?;
    let mut meta = Metadata::new("boson", config.seed, model.dim(), model.lambda);
    let options = RelaxationOptions { momentum: true, finite_difference: config.debug };
    let mut parts = Vec::new();
    for sel in &config.initial {
        let a0 = sel.resolve(&q)?;
        let record = model.relax(a0, &grid, options)?;
        let mut series = record.series;
        let npc_approx = series
            .channel("survival")
            .expect("survival channel")
            .iter()
            .map(|&s| crate::analytic::npc_from_survival(s, model.dim()))
            .collect();
        series.insert("NPC_from_survival", npc_approx)?;
        meta.lambda_a.insert(a0, model.state_width(a0)?);
        parts.push((a0, series));
    }
    let mut series = combine(parts)?;
    let ff = model.form_factor(&grid)?;
    series.merge_suffixed(&ff, "")?;
    meta.set("n_bosons", p.n_bosons);
    meta.set("n_levels", p.n_levels);
    meta.set("v", p.v);
    Ok(RunOutput { series, metadata: meta, companions: Vec::new() })
}

fn run_oscillator(config: &RunConfig) -> Result<RunOutput> {
    let grid = config.tau_grid()?;
    let tol = &config.tolerances;
    let (series, dim) = match config.oscillator_state {
        OscillatorState::Coherent => {
            let alpha = Complex64::new(config.alpha_re, config.alpha_im);
            let n_max = config.n_max.unwrap_or_else(|| CoherentParams::recommended_n_max(alpha).max(40));
            let p = CoherentParams::new(alpha, config.omega, n_max)?;
            let mut series = coherent_numeric_with(&p, &grid, tol)?;
            series.merge_suffixed(&coherent_dynamics(&p, &grid)?, "_analytic")?;
            (series, n_max + 1)
        }
        OscillatorState::Squeezed => {
            let n_max = config.n_max.unwrap_or(200);
            let p = SqueezedParams::new(config.a_position, config.omega, n_max)?;
            let mut series = squeezed_dynamics_with(&p, &grid, tol)?;
            let q0 = series.channel("Q").expect("Q channel")[0];
            series.insert("Q_classical", grid.iter().map(|t| q0 * t.cos()).collect())?;
            series.insert("P_classical", grid.iter().map(|t| -config.omega * q0 * t.sin()).collect())?;
            (series, n_max + 1)
        }
    };
    let mut meta = Metadata::new("oscillator", config.seed, dim, config.omega);
    meta.set("omega", config.omega);
    Ok(RunOutput { series, metadata: meta, companions: Vec::new() })
}

/// Convenience for tests and bindings: a computational-basis GOE run's
/// Hamiltonian and observable.
pub fn goe_inputs(config: &RunConfig) -> Result<(HermitianOperator, ObservableSpectrum)> {
    let h = sample_goe(&GoeParams::new(config.dim, config.lambda, config.seed)?)?;
    let q = ObservableSpectrum::uniform_traceless(config.dim, config.q_scale, COMPUTATIONAL_BASIS)?;
    Ok((h, q))
}
