//! `ddlab`: batch front end for the decoupling calculations.
//!
//! Exit codes: 0 success, 1 output failure, 2 invalid configuration,
//! 3 quadrature failure, 4 storage or pulse-count search out of range.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddlab_core::{
    coherence_curve, compare_schemes, mc_signal, min_pulses_with, storage_time_with, Bath,
    ClassicalBath, CompareSpec, Decoherence, McConfig, OhmicBath, PulseSequence, QuadratureSpec,
    Scheme, StorageOptions, TabulatedSpectralDensity,
};
use serde::Serialize;

use config::{Command, CompareTable, Options, Spectrum};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(ddlab_core::Error),
    Output(String),
    AllCellsFailed { quadrature: bool, first: String },
}

impl From<ddlab_core::Error> for CliError {
    fn from(e: ddlab_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use ddlab_core::Error as E;
        match self {
            CliError::Output(_) => 1,
            CliError::Config(_) => 2,
            CliError::AllCellsFailed { quadrature, .. } => {
                if *quadrature {
                    3
                } else {
                    2
                }
            }
            CliError::Core(e) => match e.root() {
                E::Quadrature { .. } => 3,
                E::RangeExhausted { .. } | E::SearchExhausted { .. } => 4,
                E::Io(_) => 1,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Output(m) => write!(f, "output: {m}"),
            CliError::AllCellsFailed { first, .. } => {
                write!(f, "every cell failed; first error: {first}")
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ddlab",
    version,
    about = "Qubit coherence under pi-pulse sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, clap::Args)]
struct Shared {
    /// JSON file with any of the flags below; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write to this file instead of standard output
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// No progress messages on standard error
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(flatten)]
    options: Options,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Phase, decay exponent and signal on a time grid
    #[command(allow_negative_numbers = true)]
    Signal(Shared),
    /// First time the storage error reaches epsilon
    #[command(allow_negative_numbers = true)]
    Storage(Shared),
    /// Smallest pulse count reaching a target storage time
    #[command(allow_negative_numbers = true)]
    MinPulses(Shared),
    /// Equidistant and UDD side by side over coupling strengths and temperatures
    #[command(allow_negative_numbers = true)]
    Compare(Shared),
    /// Monte Carlo signal for classical noise against the filter integral
    #[command(allow_negative_numbers = true)]
    Mc(Shared),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, command, shared) = match &cli.command {
        Sub::Signal(s) => ("signal", Command::Signal, s),
        Sub::Storage(s) => ("storage", Command::Storage, s),
        Sub::MinPulses(s) => ("min-pulses", Command::MinPulses, s),
        Sub::Compare(s) => ("compare", Command::Compare, s),
        Sub::Mc(s) => ("mc", Command::Mc, s),
    };
    match run(name, command, shared) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddlab {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(name: &str, command: Command, shared: &Shared) -> Result<(), CliError> {
    let base = match &shared.config {
        Some(path) => Options::from_file(path)?,
        None => Options::default(),
    };
    let opts = base.overlay(&shared.options).resolve(command)?;
    let progress = |msg: String| {
        if !shared.quiet {
            eprintln!("ddlab {name}: {msg}");
        }
    };
    let mut out: Box<dyn Write> = match &shared.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match command {
        Command::Signal => cmd_signal(&opts, &mut out, &progress)?,
        Command::Storage => cmd_storage(&opts, &mut out, &progress)?,
        Command::MinPulses => cmd_min_pulses(&opts, &mut out, &progress)?,
        Command::Compare => cmd_compare(&opts, &mut out, &progress)?,
        Command::Mc => cmd_mc(&opts, &mut out, &progress)?,
    }
    out.flush()?;
    Ok(())
}

fn config_err(e: ddlab_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn quad_spec(opts: &Options) -> Result<QuadratureSpec, CliError> {
    let spec = QuadratureSpec {
        rel_tol: opts.rel_tol.unwrap(),
        ..QuadratureSpec::default()
    };
    spec.validate().map_err(config_err)?;
    Ok(spec)
}

fn sequence(opts: &Options) -> Result<PulseSequence, CliError> {
    match (opts.scheme.unwrap(), &opts.pulses) {
        (Scheme::Custom, Some(path)) => PulseSequence::from_csv_path(path).map_err(config_err),
        (scheme, _) => {
            let n = opts
                .n
                .ok_or_else(|| CliError::Config("--n is required".into()))?;
            PulseSequence::generate(scheme, n).map_err(config_err)
        }
    }
}

fn bath(opts: &Options, alpha: f64, temperature: f64) -> Result<Bath, CliError> {
    match &opts.density {
        Some(path) => {
            let density = TabulatedSpectralDensity::from_csv_path(path).map_err(config_err)?;
            Bath::tabulated(density, temperature).map_err(config_err)
        }
        None => Ok(OhmicBath::new(alpha, opts.omega_d.unwrap(), temperature)
            .map_err(config_err)?
            .into()),
    }
}

fn storage_options(opts: &Options) -> StorageOptions {
    StorageOptions {
        criterion: opts.criterion.unwrap().into(),
        t_min: opts.tmin.unwrap(),
        t_max: opts.tmax.unwrap(),
        scan_points: opts.points.unwrap(),
        ..StorageOptions::default()
    }
}

fn check_epsilon(eps: f64) -> Result<f64, CliError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(eps)
    } else {
        Err(CliError::Config(format!(
            "--epsilon must lie in (0, 1), got {eps}"
        )))
    }
}

#[derive(Serialize)]
struct SignalRow {
    t: f64,
    phi: f64,
    chi: f64,
    s: f64,
    one_minus_s: f64,
    envelope_error: f64,
}

fn cmd_signal(
    opts: &Options,
    out: &mut dyn Write,
    progress: &dyn Fn(String),
) -> Result<(), CliError> {
    let quad = quad_spec(opts)?;
    let seq = sequence(opts)?;
    let bath = bath(opts, opts.alpha.unwrap(), opts.temperature.unwrap())?;
    let grid = opts.grid()?;
    progress(format!(
        "{} points, {} {} pulses",
        grid.len(),
        seq.n(),
        seq.scheme()
    ));
    let curve = coherence_curve(&seq, &bath, &grid, &quad)?;
    let rows: Vec<SignalRow> = curve
        .points
        .iter()
        .map(|p| SignalRow {
            t: p.t,
            phi: p.phi,
            chi: p.chi,
            s: p.signal,
            one_minus_s: p.one_minus_s,
            envelope_error: p.envelope_error,
        })
        .collect();
    output::emit(out, "signal", opts, &rows)
}

#[derive(Serialize)]
struct StorageRow {
    scheme: Scheme,
    n: usize,
    alpha: f64,
    temperature: f64,
    epsilon: f64,
    criterion: ddlab_core::ErrorCriterion,
    t_store: f64,
    bracket_lo: f64,
    bracket_hi: f64,
    floor: bool,
    evaluations: usize,
}

fn cmd_storage(
    opts: &Options,
    out: &mut dyn Write,
    progress: &dyn Fn(String),
) -> Result<(), CliError> {
    let quad = quad_spec(opts)?;
    let seq = sequence(opts)?;
    let (alpha, temperature) = (opts.alpha.unwrap(), opts.temperature.unwrap());
    let bath = bath(opts, alpha, temperature)?;
    let epsilon = check_epsilon(opts.epsilon.unwrap())?;
    let sopts = storage_options(opts);
    progress(format!(
        "scanning [{}, {}] for 1 - s = {epsilon:e}",
        sopts.t_min, sopts.t_max
    ));
    let r = storage_time_with(&seq, &bath, epsilon, &sopts, &quad)?;
    if r.floor {
        progress("error already above epsilon at the start of the scan".into());
    }
    let row = StorageRow {
        scheme: seq.scheme(),
        n: seq.n(),
        alpha,
        temperature,
        epsilon,
        criterion: r.criterion,
        t_store: r.t_store,
        bracket_lo: r.bracket.0,
        bracket_hi: r.bracket.1,
        floor: r.floor,
        evaluations: r.evaluations,
    };
    output::emit(out, "storage", opts, &[row])
}

#[derive(Serialize)]
struct MinPulsesRow {
    scheme: Scheme,
    alpha: f64,
    temperature: f64,
    epsilon: f64,
    t_target: f64,
    n: usize,
    storage_time: f64,
    previous_storage_time: Option<f64>,
    monotonicity_violation: bool,
}

fn cmd_min_pulses(
    opts: &Options,
    out: &mut dyn Write,
    progress: &dyn Fn(String),
) -> Result<(), CliError> {
    let quad = quad_spec(opts)?;
    let scheme = opts.scheme.unwrap();
    if scheme == Scheme::Custom {
        return Err(CliError::Config(
            "min-pulses needs scheme equidistant or udd".into(),
        ));
    }
    let (alpha, temperature) = (opts.alpha.unwrap(), opts.temperature.unwrap());
    let bath = bath(opts, alpha, temperature)?;
    let epsilon = check_epsilon(opts.epsilon.unwrap())?;
    let t_target = opts.t_target.unwrap();
    progress(format!(
        "searching {scheme} pulse counts for storage time {t_target}"
    ));
    let r = min_pulses_with(
        scheme,
        &bath,
        epsilon,
        t_target,
        &storage_options(opts),
        &quad,
    )?;
    if r.monotonicity_violation {
        progress("storage time is not monotone in n here; answer from a linear scan".into());
    }
    let row = MinPulsesRow {
        scheme,
        alpha,
        temperature,
        epsilon,
        t_target,
        n: r.n,
        storage_time: r.storage_time,
        previous_storage_time: r.previous_storage_time,
        monotonicity_violation: r.monotonicity_violation,
    };
    output::emit(out, "min-pulses", opts, &[row])
}

fn cmd_compare(
    opts: &Options,
    out: &mut dyn Write,
    progress: &dyn Fn(String),
) -> Result<(), CliError> {
    let quad = quad_spec(opts)?;
    let alphas = opts.alphas.clone().unwrap();
    let temperatures = opts.temperatures.clone().unwrap();
    for &a in &alphas {
        OhmicBath::new(a, opts.omega_d.unwrap(), 0.0).map_err(config_err)?;
    }
    for &t in &temperatures {
        OhmicBath::new(0.0, opts.omega_d.unwrap(), t).map_err(config_err)?;
    }
    let storage_table = opts.table == Some(CompareTable::Storage);
    let mut spec = CompareSpec::new(opts.n.unwrap(), alphas, temperatures, Vec::new());
    spec.omega_d = opts.omega_d.unwrap();
    spec.criterion = opts.criterion.unwrap().into();
    if storage_table {
        spec.epsilon = Some(check_epsilon(opts.epsilon.unwrap())?);
    } else {
        spec.t_grid = opts.grid()?;
    }
    progress(format!(
        "{} x {} cells, n = {}",
        spec.alphas.len(),
        spec.temperatures.len(),
        spec.n
    ));
    let table = compare_schemes(&spec, &quad).map_err(config_err)?;
    if storage_table {
        if table.storage.iter().all(|s| s.error.is_some()) {
            return Err(all_failed(&table.storage[0].error));
        }
        return output::emit(out, "compare", opts, &table.storage);
    }
    if !table.rows.is_empty() && table.rows.iter().all(|r| r.error.is_some()) {
        return Err(all_failed(&table.rows[0].error));
    }
    output::emit(out, "compare", opts, &table.rows)
}

fn all_failed(first: &Option<String>) -> CliError {
    let first = first.clone().unwrap_or_default();
    CliError::AllCellsFailed {
        quadrature: first.contains("did not converge"),
        first,
    }
}

#[derive(Serialize)]
struct McRow {
    t: f64,
    mean: f64,
    stderr: f64,
    samples: usize,
    seed: u64,
    analytic: f64,
    z_score: f64,
}

fn cmd_mc(opts: &Options, out: &mut dyn Write, progress: &dyn Fn(String)) -> Result<(), CliError> {
    let quad = quad_spec(opts)?;
    let seq = sequence(opts)?;
    let classical = match opts.spectrum.unwrap() {
        Spectrum::Ohmic => {
            let quantum = bath(opts, opts.alpha.unwrap(), opts.temperature.unwrap())?;
            ClassicalBath::from_quantum(&quantum).map_err(config_err)?
        }
        Spectrum::Flat => {
            ClassicalBath::flat(opts.p0.unwrap(), opts.omega_max.unwrap()).map_err(config_err)?
        }
    };
    let mut cfg = McConfig::for_bath(&classical, opts.seed.unwrap());
    cfg.samples = opts.samples.unwrap();
    cfg.mode_count = opts.mode_count.unwrap();
    if let Some(dt) = opts.dt {
        cfg.dt = dt;
    }
    let bath: Bath = classical.clone().into();
    let eval = Decoherence::new(&seq, &bath, &quad).map_err(config_err)?;
    let grid = opts.grid()?;
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        progress(format!("t = {t}: {} trajectories", cfg.samples));
        let est = mc_signal(&classical, &seq, t, &cfg).map_err(config_err)?;
        let analytic = (-2.0 * eval.chi(t)?.value).exp();
        let diff = est.mean - analytic;
        let z_score = if est.stderr > 0.0 {
            diff / est.stderr
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        rows.push(McRow {
            t,
            mean: est.mean,
            stderr: est.stderr,
            samples: est.samples,
            seed: est.seed,
            analytic,
            z_score,
        });
    }
    output::emit(out, "mc", opts, &rows)
}
