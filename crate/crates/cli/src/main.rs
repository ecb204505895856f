//! `qrelax`: exact relaxation dynamics of observables from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use qrelax::io::{execute, Mode, RunConfig};
use qrelax::Error;

#[derive(Parser, Debug)]
#[command(name = "qrelax", version, about = "Exact time evolution of observables in random-matrix, boson and oscillator models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random-matrix (GOE) Hamiltonian with a uniformly spaced observable.
    Goe(GoeArgs),
    /// Interacting bosons on equidistant levels with random two-body interactions.
    Boson(BosonArgs),
    /// Harmonic oscillator with a coherent or squeezed initial state.
    Oscillator(OscillatorArgs),
    /// Hamiltonian (and optionally observable) read from matrix files.
    External(ExternalArgs),
}

/// Options shared by every mode.
#[derive(Args, Debug)]
struct Common {
    /// key = value file applied before command-line flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Largest scaled time (time in units of the inverse energy width).
    #[arg(long = "tau-max")]
    tau_max: Option<String>,
    /// Number of grid points, including zero.
    #[arg(long = "tau-steps")]
    tau_steps: Option<String>,
    /// Output file; without it the series goes to standard output.
    #[arg(long)]
    out: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Omit timestamps so repeated runs are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// Extra diagnostics: verbose logging and a finite-difference momentum channel.
    #[arg(long)]
    debug: bool,
    /// Comma-separated initial states, each `index:<k>` or `q:<value>`.
    #[arg(long)]
    initial: Option<String>,
    /// Tolerance override `name=value`, repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
}

#[derive(Args, Debug)]
struct GoeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dim: Option<String>,
    /// Energy width of the ensemble.
    #[arg(long)]
    lambda: Option<String>,
    /// Spacing scale of the observable eigenvalues.
    #[arg(long = "q-scale")]
    q_scale: Option<String>,
    /// Number of independent matrices to average (seeds seed, seed+1, ...).
    #[arg(long)]
    realizations: Option<String>,
}

#[derive(Args, Debug)]
struct BosonArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "n-bosons")]
    n_bosons: Option<String>,
    #[arg(long = "n-levels")]
    n_levels: Option<String>,
    /// Interaction strength.
    #[arg(long)]
    v: Option<String>,
    /// Refuse bases larger than this.
    #[arg(long = "dimension-cap")]
    dimension_cap: Option<String>,
    /// Also write the Hamiltonian as a coordinate matrix file.
    #[arg(long = "export-hamiltonian")]
    export_hamiltonian: Option<String>,
}

#[derive(Args, Debug)]
struct OscillatorArgs {
    #[command(flatten)]
    common: Common,
    /// coherent or squeezed.
    #[arg(long)]
    state: Option<String>,
    /// Real part of the coherent amplitude.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "alpha-im")]
    alpha_im: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    /// Fock-space truncation.
    #[arg(long = "n-max")]
    n_max: Option<String>,
    /// Initial position of the squeezed state.
    #[arg(long = "a-position")]
    a_position: Option<String>,
}

#[derive(Args, Debug)]
struct ExternalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "hamiltonian-file")]
    hamiltonian_file: Option<String>,
    /// Observable matrix; defaults to uniformly spaced values in the file's basis.
    #[arg(long = "observable-file")]
    observable_file: Option<String>,
    #[arg(long = "q-scale")]
    q_scale: Option<String>,
    #[arg(long = "max-ingest-dim")]
    max_ingest_dim: Option<String>,
    /// Comma-separated scaled times for strength-function and histogram snapshots.
    #[arg(long = "snapshot-tau")]
    snapshot_tau: Option<String>,
    #[arg(long = "histogram-bins")]
    histogram_bins: Option<String>,
    #[arg(long = "strength-bins")]
    strength_bins: Option<String>,
    #[arg(long = "strength-window")]
    strength_window: Option<String>,
}

type Pairs = Vec<(&'static str, Option<String>)>;

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Goe(_) => Mode::Goe,
            Command::Boson(_) => Mode::Boson,
            Command::Oscillator(_) => Mode::Oscillator,
            Command::External(_) => Mode::External,
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Goe(a) => &a.common,
            Command::Boson(a) => &a.common,
            Command::Oscillator(a) => &a.common,
            Command::External(a) => &a.common,
        }
    }

    fn mode_pairs(&self) -> Pairs {
        match self {
            Command::Goe(a) => vec![
                ("dim", a.dim.clone()),
                ("lambda", a.lambda.clone()),
                ("q-scale", a.q_scale.clone()),
                ("realizations", a.realizations.clone()),
            ],
            Command::Boson(a) => vec![
                ("n-bosons", a.n_bosons.clone()),
                ("n-levels", a.n_levels.clone()),
                ("v", a.v.clone()),
                ("dimension-cap", a.dimension_cap.clone()),
                ("export-hamiltonian", a.export_hamiltonian.clone()),
            ],
            Command::Oscillator(a) => vec![
                ("state", a.state.clone()),
                ("alpha", a.alpha.clone()),
                ("alpha-im", a.alpha_im.clone()),
                ("omega", a.omega.clone()),
                ("n-max", a.n_max.clone()),
                ("a-position", a.a_position.clone()),
            ],
            Command::External(a) => vec![
                ("hamiltonian-file", a.hamiltonian_file.clone()),
                ("observable-file", a.observable_file.clone()),
                ("q-scale", a.q_scale.clone()),
                ("max-ingest-dim", a.max_ingest_dim.clone()),
                ("snapshot-tau", a.snapshot_tau.clone()),
                ("histogram-bins", a.histogram_bins.clone()),
                ("strength-bins", a.strength_bins.clone()),
                ("strength-window", a.strength_window.clone()),
            ],
        }
    }
}

/// Builds the run configuration: defaults, then the config file, then flags.
fn build_config(cmd: &Command) -> Result<RunConfig, Error> {
    let mut config = RunConfig::new(cmd.mode());
    let common = cmd.common();
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    let mut pairs: Pairs = vec![
        ("seed", common.seed.clone()),
        ("tau-max", common.tau_max.clone()),
        ("tau-steps", common.tau_steps.clone()),
        ("out", common.out.clone()),
        ("format", common.format.clone()),
        ("initial", common.initial.clone()),
    ];
    pairs.extend(cmd.mode_pairs());
    for (key, value) in pairs {
        if let Some(value) = value {
            config.apply(key, &value)?;
        }
    }
    for item in &common.tol {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--tol expects NAME=VALUE, got `{item}`")))?;
        config.apply(&format!("tol.{}", name.trim()), value.trim())?;
    }
    config.deterministic |= common.deterministic;
    config.debug |= common.debug;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.command.common().debug { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = build_config(&cli.command).and_then(|config| execute(&config));
    match result {
        Ok(output) => {
            log::debug!("wrote {} points of {} channels", output.series.len(), output.series.channel_names().count());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, Error::Config(_) | Error::InvalidParameter(_)) {
                let name = cli.command.mode().name();
                let mut cmd = Cli::command();
                if let Some(sub) = cmd.find_subcommand_mut(name) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
