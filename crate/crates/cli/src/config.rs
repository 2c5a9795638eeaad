use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ddlab_core::{ErrorCriterion, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spectrum {
    /// `p = pi J coth` of the ohmic bath
    Ohmic,
    /// `p0` on `[0, omega_max]`
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareTable {
    /// signal of both schemes on the time grid
    Sweep,
    /// storage times of both schemes and their ratio
    Storage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Envelope,
    Full,
}

impl From<Criterion> for ErrorCriterion {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::Envelope => ErrorCriterion::Envelope,
            Criterion::Full => ErrorCriterion::FullSignal,
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: ddlab_core::Error| e.to_string())
}

/// Run parameters. Every field can come from a flag or from the `--config`
/// JSON file (same names); flags win. After [`Options::resolve`] the object is
/// written into each output so that the run can be repeated from it.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    /// equidistant | udd | custom
    #[arg(long, value_parser = parse_scheme)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Number of pulses
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// CSV file with a `delta` column (scheme custom)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulses: Option<PathBuf>,
    /// Ohmic coupling strength
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Comma-separated coupling strengths (compare)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Bath cutoff frequency
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_d: Option<f64>,
    /// CSV file with `omega,J` columns replacing the ohmic density
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Comma-separated temperatures (compare)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<Vec<f64>>,
    /// Storage error threshold
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<Criterion>,
    /// Required storage time (min-pulses)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_target: Option<f64>,
    /// Start of the time grid, or of the storage scan
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmin: Option<f64>,
    /// End of the time grid, or of the storage scan
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
    /// Comma-separated explicit times; replaces the grid
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Relative tolerance of the frequency integrals
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<CompareTable>,
    /// Classical spectrum for mc
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Spectrum>,
    /// Height of the flat spectrum
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    /// Cutoff of the flat spectrum
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Trajectory time step
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_count: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Which command the options are resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Signal,
    Storage,
    MinPulses,
    Compare,
    Mc,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

macro_rules! default {
    ($opts:ident; $($field:ident = $value:expr),* $(,)?) => {
        $( if $opts.$field.is_none() { $opts.$field = Some($value); } )*
    };
}

impl Options {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overlay(mut self, flags: &Options) -> Self {
        overlay!(self, flags;
            scheme, n, pulses, alpha, alphas, omega_d, density, temperature, temperatures,
            epsilon, criterion, t_target, tmin, tmax, points, spacing, times, rel_tol, table,
            spectrum, p0, omega_max, samples, seed, dt, mode_count, format);
        self
    }

    /// Fills in the defaults used by `command`.
    pub fn resolve(mut self, command: Command) -> Result<Self, CliError> {
        default!(self; omega_d = 1.0, temperature = 0.0, rel_tol = 1e-10, format = Format::Csv);
        match command {
            Command::Signal => {
                default!(self; scheme = Scheme::Udd, n = 0, alpha = 0.1);
                self.default_grid(0.0, 10.0, 100);
            }
            Command::Storage => {
                default!(self; scheme = Scheme::Udd, n = 0, alpha = 0.1, epsilon = 1e-4,
                    criterion = Criterion::Envelope, tmin = 1e-3, tmax = 1e4, points = 60);
            }
            Command::MinPulses => {
                default!(self; scheme = Scheme::Udd, alpha = 0.1, epsilon = 1e-4,
                    criterion = Criterion::Envelope, t_target = 5.0, tmin = 1e-3, tmax = 1e4,
                    points = 60);
            }
            Command::Compare => {
                default!(self; n = 100, alphas = vec![0.25, 0.1, 0.01, 0.001],
                    temperatures = vec![0.0], criterion = Criterion::Envelope,
                    table = CompareTable::Sweep);
                if self.table == Some(CompareTable::Storage) {
                    default!(self; epsilon = 1e-4);
                } else {
                    self.default_grid(0.0, 10.0, 100);
                }
            }
            Command::Mc => {
                default!(self; scheme = Scheme::Udd, n = 0, spectrum = Spectrum::Ohmic,
                    samples = 10_000, seed = 0, mode_count = 512);
                match self.spectrum {
                    Some(Spectrum::Flat) => {
                        default!(self; p0 = 0.1, omega_max = 1.0);
                    }
                    _ => {
                        default!(self; alpha = 0.1);
                    }
                }
                if self.times.is_none() && self.tmax.is_none() {
                    self.times = Some(vec![0.5, 2.0, 5.0]);
                }
                self.default_grid(0.0, 5.0, 3);
            }
        }
        if self.scheme == Some(Scheme::Custom) && self.pulses.is_none() {
            return Err(CliError::Config("scheme custom needs --pulses".into()));
        }
        Ok(self)
    }

    fn default_grid(&mut self, tmin: f64, tmax: f64, points: usize) {
        if self.times.is_some() {
            return;
        }
        default!(self; spacing = Spacing::Linear);
        let start = match self.spacing {
            Some(Spacing::Log) => 1e-2,
            _ => tmin,
        };
        default!(self; tmin = start, tmax = tmax, points = points);
    }

    /// The time grid: explicit times or `points` values between `tmin` and `tmax`.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if let Some(times) = &self.times {
            if times.is_empty() {
                return Err(CliError::Config("--times is empty".into()));
            }
            return Ok(times.clone());
        }
        let (lo, hi, points) = (self.tmin.unwrap(), self.tmax.unwrap(), self.points.unwrap());
        if points == 0 {
            return Err(CliError::Config("--points must be >= 1".into()));
        }
        if !(lo >= 0.0 && hi >= lo) {
            return Err(CliError::Config(format!("invalid grid [{lo}, {hi}]")));
        }
        if points == 1 {
            return Ok(vec![hi]);
        }
        let last = (points - 1) as f64;
        match self.spacing.unwrap_or(Spacing::Linear) {
            Spacing::Linear => Ok((0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / last
                    }
                })
                .collect()),
            Spacing::Log => {
                if lo <= 0.0 {
                    return Err(CliError::Config("log spacing needs --tmin > 0".into()));
                }
                let r = (hi / lo).ln() / last;
                Ok((0..points)
                    .map(|i| {
                        if i + 1 == points {
                            hi
                        } else {
                            lo * (r * i as f64).exp()
                        }
                    })
                    .collect())
            }
        }
    }
}
