//! Result files: CSV time series, JSON documents and run metadata.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path().to_path_buf(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path().to_path_buf(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown output format `{other}` (expected csv or json)"))),
        }
    }
}

/// Descriptive data written alongside every run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: String,
    pub mode: String,
    pub seed: u64,
    pub dimension: usize,
    pub lambda: f64,
    /// Per-initial-state widths `λ_a`, keyed by basis index.
    pub lambda_a: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    /// Mode-specific scalars.
    pub scalars: BTreeMap<String, Value>,
}

impl Metadata {
    pub fn new(mode: &str, seed: u64, dimension: usize, lambda: f64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            mode: mode.to_string(),
            seed,
            dimension,
            lambda,
            lambda_a: BTreeMap::new(),
            timestamp_unix: None,
            scalars: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.scalars.insert(key.to_string(), value.into());
    }

    /// Records the wall-clock time unless the run is deterministic.
    pub fn stamp(&mut self, deterministic: bool) {
        self.timestamp_unix = if deterministic {
            None
        } else {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs())
        };
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata is serializable") + "\n"
    }
}

#[derive(Serialize)]
struct Channel<'a> {
    name: &'a str,
    values: &'a [f64],
}

#[derive(Serialize)]
struct Document<'a> {
    metadata: &'a Metadata,
    grid_name: &'a str,
    grid: &'a [f64],
    channels: Vec<Channel<'a>>,
}

/// A series with metadata as one JSON document.
pub fn series_to_json(series: &TimeSeries, metadata: &Metadata) -> String {
    let doc = Document {
        metadata,
        grid_name: series.grid_name(),
        grid: series.grid(),
        channels: series.channels().iter().map(|(name, values)| Channel { name, values }).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("series is serializable") + "\n"
}

/// Path of the metadata file written next to a CSV output.
pub fn metadata_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

/// Path of an auxiliary output: `run.csv` + `strength_tau1` →
/// `run.strength_tau1.csv`.
pub fn companion_path(out: &Path, tag: &str, format: OutputFormat) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    out.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Writes a series to `out` in the chosen format. CSV output gets a sidecar
/// metadata file.
pub fn write_series(out: &Path, series: &TimeSeries, metadata: &Metadata, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            write_atomic(out, series.to_csv_string().as_bytes())?;
            write_atomic(&metadata_path(out), metadata.to_json().as_bytes())
        }
        OutputFormat::Json => write_atomic(out, series_to_json(series, metadata).as_bytes()),
    }
}
