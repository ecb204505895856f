//! Configuration, matrix-file ingestion, result files and run drivers.

pub mod config;
pub mod matrix_file;
pub mod output;
pub mod run;

pub use config::{InitialSelector, Mode, OscillatorState, RunConfig};
pub use matrix_file::{ingest_matrix, MatrixHeader, MatrixKind};
pub use output::{Metadata, OutputFormat};
pub use run::{execute, run, RunOutput};
