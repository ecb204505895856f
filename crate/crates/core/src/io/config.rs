//! Run configuration and the flat `key = value` config-file format.
//!
//! Keys match the long command-line flags without the leading dashes
//! (`dim`, `tau-max`, `initial`, ...). Tolerances are set with
//! `tol.<name>`. Blank lines and lines starting with `#` are ignored.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::output::OutputFormat;
use crate::observables::ObservableSpectrum;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Goe,
    Boson,
    Oscillator,
    External,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Goe => "goe",
            Mode::Boson => "boson",
            Mode::Oscillator => "oscillator",
            Mode::External => "external",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "goe" => Ok(Mode::Goe),
            "boson" => Ok(Mode::Boson),
            "oscillator" => Ok(Mode::Oscillator),
            "external" => Ok(Mode::External),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// How an initial basis state is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSelector {
    /// Basis index (rank in ascending observable order).
    Index(usize),
    /// State whose observable value is nearest the target.
    NearestQ(f64),
}

impl InitialSelector {
    pub fn resolve(&self, q: &ObservableSpectrum) -> Result<usize> {
        match *self {
            InitialSelector::Index(i) if i < q.dim() => Ok(i),
            InitialSelector::Index(i) => Err(Error::IndexOutOfRange { index: i, dim: q.dim() }),
            InitialSelector::NearestQ(v) => Ok(q.nearest_index(v)),
        }
    }
}

/// Parses `index:k`, `q:value`, or a comma-separated list of them.
pub fn parse_initial(s: &str) -> Result<Vec<InitialSelector>> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            let bad = || Error::Config(format!("invalid initial-state selector `{part}` (use index:k or q:value)"));
            let (kind, value) = part.split_once(':').ok_or_else(bad)?;
            match kind.trim() {
                "index" => value.trim().parse().map(InitialSelector::Index).map_err(|_| bad()),
                "q" => value.trim().parse().map(InitialSelector::NearestQ).map_err(|_| bad()),
                _ => Err(bad()),
            }
        })
        .collect()
}

/// Oscillator initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillatorState {
    Coherent,
    Squeezed,
}

impl FromStr for OscillatorState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(Self::Coherent),
            "squeezed" => Ok(Self::Squeezed),
            other => Err(Error::Config(format!("unknown oscillator state `{other}`"))),
        }
    }
}

/// Everything a run needs. Defaults follow [`RunConfig::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub tau_max: f64,
    pub tau_steps: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub deterministic: bool,
    pub debug: bool,
    pub tolerances: Tolerances,
    pub initial: Vec<InitialSelector>,
    // goe
    pub dim: usize,
    pub lambda: f64,
    /// Scale `q` of the generated observable spectrum.
    pub q_scale: f64,
    pub realizations: usize,
    // boson
    pub n_bosons: usize,
    pub n_levels: usize,
    pub v: f64,
    pub dimension_cap: usize,
    pub export_hamiltonian: Option<PathBuf>,
    // oscillator
    pub oscillator_state: OscillatorState,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub omega: f64,
    pub n_max: Option<usize>,
    pub a_position: f64,
    // external
    pub hamiltonian_file: Option<PathBuf>,
    pub observable_file: Option<PathBuf>,
    pub max_ingest_dim: u64,
    /// Scaled times at which histograms and strength functions are written.
    pub snapshot_taus: Vec<f64>,
    pub histogram_bins: Option<usize>,
    pub strength_bins: usize,
    pub strength_window: usize,
}

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        let initial = match mode {
            Mode::Goe => vec![InitialSelector::NearestQ(-1.5)],
            _ => vec![InitialSelector::Index(0)],
        };
        Self {
            mode,
            seed: 42,
            tau_max: 20.0,
            tau_steps: 2001,
            out: None,
            format: OutputFormat::Csv,
            deterministic: false,
            debug: false,
            tolerances: Tolerances::default(),
            initial,
            dim: 2000,
            lambda: 1.0,
            q_scale: 1.0,
            realizations: 1,
            n_bosons: 6,
            n_levels: 11,
            v: 1.0,
            dimension_cap: crate::boson::DEFAULT_DIMENSION_CAP,
            export_hamiltonian: None,
            oscillator_state: OscillatorState::Coherent,
            alpha_re: 1.0,
            alpha_im: 0.0,
            omega: 1.0,
            n_max: None,
            a_position: 1.0,
            hamiltonian_file: None,
            observable_file: None,
            max_ingest_dim: crate::io::matrix_file::DEFAULT_MAX_DIM,
            snapshot_taus: vec![1.0, 5.0],
            histogram_bins: None,
            strength_bins: 40,
            strength_window: 25,
        }
    }

    /// Sets one option from its textual form.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        fn list(key: &str, value: &str) -> Result<Vec<f64>> {
            value.split(',').map(|v| parse(key, v.trim())).collect()
        }
        if let Some(name) = key.strip_prefix("tol.") {
            return self.tolerances.set(name, parse(key, value)?);
        }
        match key {
            "mode" => {
                let mode: Mode = value.parse()?;
                if mode != self.mode {
                    return Err(Error::Config(format!(
                        "config file is for mode `{}` but `{}` was requested",
                        mode.name(),
                        self.mode.name()
                    )));
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "tau-max" => self.tau_max = parse(key, value)?,
            "tau-steps" => self.tau_steps = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "deterministic" => self.deterministic = parse(key, value)?,
            "debug" => self.debug = parse(key, value)?,
            "initial" => self.initial = parse_initial(value)?,
            "initial-q" => self.initial = vec![InitialSelector::NearestQ(parse(key, value)?)],
            "dim" => self.dim = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "q-scale" => self.q_scale = parse(key, value)?,
            "realizations" => self.realizations = parse(key, value)?,
            "n-bosons" => self.n_bosons = parse(key, value)?,
            "n-levels" => self.n_levels = parse(key, value)?,
            "v" => self.v = parse(key, value)?,
            "dimension-cap" => self.dimension_cap = parse(key, value)?,
            "export-hamiltonian" => self.export_hamiltonian = Some(PathBuf::from(value)),
            "state" => self.oscillator_state = value.parse()?,
            "alpha" => self.alpha_re = parse(key, value)?,
            "alpha-im" => self.alpha_im = parse(key, value)?,
            "omega" => self.omega = parse(key, value)?,
            "n-max" => self.n_max = Some(parse(key, value)?),
            "a-position" => self.a_position = parse(key, value)?,
            "hamiltonian-file" => self.hamiltonian_file = Some(PathBuf::from(value)),
            "observable-file" => self.observable_file = Some(PathBuf::from(value)),
            "max-ingest-dim" => self.max_ingest_dim = parse(key, value)?,
            "snapshot-tau" => self.snapshot_taus = list(key, value)?,
            "histogram-bins" => self.histogram_bins = Some(parse(key, value)?),
            "strength-bins" => self.strength_bins = parse(key, value)?,
            "strength-window" => self.strength_window = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        self.apply_text(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.apply(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.tau_steps < 2 {
            return fail(format!("tau-steps must be at least 2, got {}", self.tau_steps));
        }
        if !(self.tau_max.is_finite() && self.tau_max > 0.0) {
            return fail(format!("tau-max must be positive, got {}", self.tau_max));
        }
        if self.initial.is_empty() {
            return fail("at least one initial state is required".into());
        }
        match self.mode {
            Mode::Goe => {
                if self.dim < 2 {
                    return fail(format!("dim must be at least 2, got {}", self.dim));
                }
                if !(self.lambda.is_finite() && self.lambda > 0.0) {
                    return fail(format!("lambda must be positive, got {}", self.lambda));
                }
                if self.realizations == 0 {
                    return fail("realizations must be at least 1".into());
                }
            }
            Mode::Boson => {
                if self.n_bosons == 0 || self.n_levels == 0 {
                    return fail("n-bosons and n-levels must be positive".into());
                }
                if !self.v.is_finite() {
                    return fail("v must be finite".into());
                }
            }
            Mode::Oscillator => {
                if !(self.omega.is_finite() && self.omega > 0.0) {
                    return fail(format!("omega must be positive, got {}", self.omega));
                }
            }
            Mode::External => {
                if self.hamiltonian_file.is_none() {
                    return fail("external mode requires --hamiltonian-file".into());
                }
            }
        }
        if self.strength_bins == 0 {
            return fail("strength-bins must be positive".into());
        }
        Ok(())
    }

    pub fn tau_grid(&self) -> Result<Vec<f64>> {
        crate::series::uniform_grid(self.tau_max, self.tau_steps)
    }
}
