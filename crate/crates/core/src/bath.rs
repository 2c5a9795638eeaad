//! Spectral densities, thermal weights and the integrand weight shared by the
//! decoherence integrals.
//!
//! Frequencies are measured in units of the cutoff `omega_d`; temperatures are
//! energies with `k_B = hbar = 1`.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `omega / (2T)` the coth factor is taken from its Laurent series.
const COTH_SERIES_THRESHOLD: f64 = 1e-6;

/// Ohmic bath with a hard Debye cutoff: `J(omega) = 2 alpha omega` for `omega <= omega_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhmicBath {
    pub alpha: f64,
    pub omega_d: f64,
    pub temperature: f64,
}

impl OhmicBath {
    pub fn new(alpha: f64, omega_d: f64, temperature: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(omega_d > 0.0) || !omega_d.is_finite() {
            return Err(Error::Domain(format!("omega_d must be > 0, got {omega_d}")));
        }
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::Domain(format!(
                "temperature must be >= 0, got {temperature}"
            )));
        }
        Ok(Self {
            alpha,
            omega_d,
            temperature,
        })
    }

    /// Zero-temperature bath in units where `omega_d = 1`.
    pub fn zero_temperature(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 0.0)
    }

    pub fn spectral_density(&self, omega: f64) -> Result<f64> {
        check_frequency(omega)?;
        Ok(self.density_unchecked(omega))
    }

    #[inline]
    fn density_unchecked(&self, omega: f64) -> f64 {
        if omega <= self.omega_d {
            2.0 * self.alpha * omega
        } else {
            0.0
        }
    }
}

/// Piecewise-linear spectral density given by samples; zero outside the sampled support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpectralDensity {
    omega: Vec<f64>,
    density: Vec<f64>,
}

impl TabulatedSpectralDensity {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Table(
                "a tabulated density needs at least two samples".into(),
            ));
        }
        let mut omega = Vec::with_capacity(samples.len());
        let mut density = Vec::with_capacity(samples.len());
        for (i, (w, j)) in samples.into_iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Table(format!(
                    "row {i}: omega {w} must be finite and >= 0"
                )));
            }
            if !j.is_finite() || j < 0.0 {
                return Err(Error::Table(format!(
                    "row {i}: J {j} must be finite and >= 0"
                )));
            }
            if let Some(&prev) = omega.last() {
                if w <= prev {
                    return Err(Error::Table(format!(
                        "row {i}: omega {w} is not strictly above {prev}"
                    )));
                }
            }
            omega.push(w);
            density.push(j);
        }
        Ok(Self { omega, density })
    }

    /// Reads a two-column CSV with header `omega,J`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "omega" || &headers[1] != "J" {
            return Err(Error::Table(format!(
                "expected header \"omega,J\", found {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut samples = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Table(format!("row {i}, column {k}: {e}")))
            };
            samples.push((parse(0)?, parse(1)?));
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.omega[0], *self.omega.last().unwrap())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.omega
    }

    pub fn spectral_density(&self, omega: f64) -> Result<f64> {
        check_frequency(omega)?;
        Ok(self.density_unchecked(omega))
    }

    fn density_unchecked(&self, omega: f64) -> f64 {
        let (lo, hi) = self.support();
        if omega < lo || omega > hi {
            return 0.0;
        }
        let k = self.omega.partition_point(|&w| w <= omega);
        if k == self.omega.len() {
            return *self.density.last().unwrap();
        }
        let (w0, w1) = (self.omega[k - 1], self.omega[k]);
        let (j0, j1) = (self.density[k - 1], self.density[k]);
        j0 + (j1 - j0) * (omega - w0) / (w1 - w0)
    }
}

/// Shared spectrum closure for classical baths.
pub type PowerSpectrumFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Classical Gaussian noise described by its one-sided power spectrum `p(omega)` on
/// `[0, omega_max]`.
#[derive(Clone)]
pub struct ClassicalBath {
    spectrum: PowerSpectrumFn,
    omega_max: f64,
    label: String,
}

impl fmt::Debug for ClassicalBath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicalBath")
            .field("label", &self.label)
            .field("omega_max", &self.omega_max)
            .finish()
    }
}

impl ClassicalBath {
    pub fn new(
        omega_max: f64,
        label: impl Into<String>,
        spectrum: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(omega_max > 0.0) || !omega_max.is_finite() {
            return Err(Error::Domain(format!(
                "omega_max must be > 0, got {omega_max}"
            )));
        }
        Ok(Self {
            spectrum: Arc::new(spectrum),
            omega_max,
            label: label.into(),
        })
    }

    /// White noise of height `p0` cut off at `omega_max`.
    pub fn flat(p0: f64, omega_max: f64) -> Result<Self> {
        if !(p0 >= 0.0) {
            return Err(Error::Domain(format!("p0 must be >= 0, got {p0}")));
        }
        Self::new(omega_max, format!("flat(p0={p0})"), move |_| p0)
    }

    /// Classical spectrum `p = pi J coth(omega / 2T)` of a quantum bath.
    pub fn from_quantum(bath: &Bath) -> Result<Self> {
        let quantum = bath.clone();
        let omega_max = bath.omega_cut();
        let label = format!("pi*J*coth of {}", bath.label());
        Self::new(omega_max, label, move |w| {
            // the product J coth stays finite at the origin; step off zero
            std::f64::consts::PI * quantum.weight_unchecked(w.max(1e-300))
        })
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `p(omega)`, zero outside `[0, omega_max]`; negative values are clipped to zero.
    pub fn power_spectrum(&self, omega: f64) -> f64 {
        if omega < 0.0 || omega > self.omega_max {
            0.0
        } else {
            (self.spectrum)(omega).max(0.0)
        }
    }
}

/// A bath as seen by the decoherence integrals.
#[derive(Debug, Clone)]
pub enum Bath {
    Ohmic(OhmicBath),
    Tabulated {
        density: TabulatedSpectralDensity,
        temperature: f64,
    },
    Classical(ClassicalBath),
}

impl From<OhmicBath> for Bath {
    fn from(b: OhmicBath) -> Self {
        Bath::Ohmic(b)
    }
}

impl From<ClassicalBath> for Bath {
    fn from(b: ClassicalBath) -> Self {
        Bath::Classical(b)
    }
}

impl Bath {
    pub fn tabulated(density: TabulatedSpectralDensity, temperature: f64) -> Result<Self> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::Domain(format!(
                "temperature must be >= 0, got {temperature}"
            )));
        }
        Ok(Bath::Tabulated {
            density,
            temperature,
        })
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Bath::Classical(_))
    }

    /// Upper limit of the frequency integrals.
    pub fn omega_cut(&self) -> f64 {
        match self {
            Bath::Ohmic(b) => b.omega_d,
            Bath::Tabulated { density, .. } => density.support().1,
            Bath::Classical(c) => c.omega_max,
        }
    }

    /// Interior points where the weight has kinks or jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Bath::Tabulated { density, .. } => density.nodes().to_vec(),
            _ => Vec::new(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Bath::Ohmic(b) => format!(
                "ohmic(alpha={}, omega_d={}, T={})",
                b.alpha, b.omega_d, b.temperature
            ),
            Bath::Tabulated {
                density,
                temperature,
            } => format!(
                "tabulated({} samples, T={temperature})",
                density.nodes().len()
            ),
            Bath::Classical(c) => format!("classical({})", c.label),
        }
    }

    /// Quantum spectral density `J(omega)`; `None` for classical baths.
    pub fn spectral_density(&self, omega: f64) -> Option<Result<f64>> {
        match self {
            Bath::Ohmic(b) => Some(b.spectral_density(omega)),
            Bath::Tabulated { density, .. } => Some(density.spectral_density(omega)),
            Bath::Classical(_) => None,
        }
    }

    pub(crate) fn density_unchecked(&self, omega: f64) -> f64 {
        match self {
            Bath::Ohmic(b) => b.density_unchecked(omega),
            Bath::Tabulated { density, .. } => density.density_unchecked(omega),
            Bath::Classical(_) => 0.0,
        }
    }

    /// `J(omega) coth(omega / 2T)` for quantum baths, `p(omega) / pi` for classical ones.
    pub fn integrand_weight(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::Domain(format!(
                "integrand weight needs omega > 0, got {omega}"
            )));
        }
        Ok(self.weight_unchecked(omega))
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, omega: f64) -> f64 {
        match self {
            Bath::Ohmic(b) => {
                let j = b.density_unchecked(omega);
                if j == 0.0 {
                    0.0
                } else {
                    j * coth_weight(b.temperature, omega)
                }
            }
            Bath::Tabulated {
                density,
                temperature,
            } => {
                let j = density.density_unchecked(omega);
                if j == 0.0 {
                    0.0
                } else {
                    j * coth_weight(*temperature, omega)
                }
            }
            Bath::Classical(c) => c.power_spectrum(omega) / std::f64::consts::PI,
        }
    }
}

fn check_frequency(omega: f64) -> Result<()> {
    if omega >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("omega must be >= 0, got {omega}")))
    }
}

/// Thermal occupation factor `coth(omega / 2T)`.
///
/// Exactly `1` at `T = 0`. For `omega / 2T < 1e-6` the two-term Laurent series
/// `2T/omega + omega/(6T)` replaces the direct evaluation.
pub fn thermal_weight(temperature: f64, omega: f64) -> Result<f64> {
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::Domain(format!("omega must be >= 0, got {omega}")));
    }
    if omega == 0.0 && temperature > 0.0 {
        return Err(Error::DivergentWeight { temperature });
    }
    Ok(coth_weight(temperature, omega))
}

#[inline]
pub(crate) fn coth_weight(temperature: f64, omega: f64) -> f64 {
    if temperature == 0.0 {
        return 1.0;
    }
    let x = omega / (2.0 * temperature);
    if x < COTH_SERIES_THRESHOLD {
        1.0 / x + x / 3.0
    } else if x > 20.0 {
        // coth(x) = 1 + 2 e^{-2x} + O(e^{-4x})
        1.0 + 2.0 * (-2.0 * x).exp()
    } else {
        1.0 / x.tanh()
    }
}
