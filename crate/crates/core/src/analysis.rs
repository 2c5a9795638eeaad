//! Storage times, minimum pulse counts and scheme comparisons.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{Bath, OhmicBath};
use crate::decoherence::Decoherence;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::sequences::{PulseSequence, Scheme};

/// Largest pulse count tried by [`min_pulses`].
pub const MAX_PULSES: usize = 100_000;

/// What counts as the storage error at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCriterion {
    /// `1 - exp(-2 chi)`: decoherence only, the deterministic phase rotation is
    /// treated as known and undone.
    #[default]
    Envelope,
    /// `1 - cos(2 phi) exp(-2 chi)`: the raw signal deficit.
    FullSignal,
}

impl std::str::FromStr for ErrorCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "envelope" => Ok(Self::Envelope),
            "full" | "full_signal" => Ok(Self::FullSignal),
            other => Err(Error::Domain(format!("unknown error criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageOptions {
    pub criterion: ErrorCriterion,
    pub t_min: f64,
    pub t_max: f64,
    pub scan_points: usize,
    /// Bisection stops once `t_hi / t_lo <= 1 + rel_width`.
    pub rel_width: f64,
}

impl Default for StorageOptions {
    fn default() -> Self {
        Self {
            criterion: ErrorCriterion::Envelope,
            t_min: 1e-3,
            t_max: 1e4,
            scan_points: 60,
            rel_width: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageResult {
    pub t_store: f64,
    pub epsilon: f64,
    /// Final bracket: the error is below `epsilon` at `.0` and has reached it at `.1`.
    pub bracket: (f64, f64),
    /// Number of quadratures performed.
    pub evaluations: usize,
    /// The error already exceeded `epsilon` at the start of the scan range.
    pub floor: bool,
    pub criterion: ErrorCriterion,
}

struct ErrorProbe<'a> {
    eval: Decoherence<'a>,
    criterion: ErrorCriterion,
    evaluations: usize,
}

impl ErrorProbe<'_> {
    fn error(&mut self, t: f64) -> Result<f64> {
        match self.criterion {
            ErrorCriterion::Envelope => {
                self.evaluations += 1;
                let chi = self.eval.chi(t)?.value;
                Ok(-(-2.0 * chi).exp_m1())
            }
            ErrorCriterion::FullSignal => {
                self.evaluations += 2;
                Ok(self.eval.signal(t)?.one_minus_s)
            }
        }
    }
}

/// First time at which the storage error reaches `epsilon`, with default scan options.
pub fn storage_time(
    seq: &PulseSequence,
    bath: &Bath,
    epsilon: f64,
    quad: &QuadratureSpec,
) -> Result<StorageResult> {
    storage_time_with(seq, bath, epsilon, &StorageOptions::default(), quad)
}

/// Scans `scan_points` log-spaced times over `[t_min, t_max]` for the first
/// point where the error reaches `epsilon`, then bisects geometrically.
pub fn storage_time_with(
    seq: &PulseSequence,
    bath: &Bath,
    epsilon: f64,
    opts: &StorageOptions,
    quad: &QuadratureSpec,
) -> Result<StorageResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(opts.t_min > 0.0 && opts.t_max > opts.t_min) || opts.scan_points < 2 {
        return Err(Error::Domain("invalid storage scan range".into()));
    }
    if !(opts.rel_width > 0.0) {
        return Err(Error::Domain("rel_width must be > 0".into()));
    }
    let mut probe = ErrorProbe {
        eval: Decoherence::new(seq, bath, quad)?,
        criterion: opts.criterion,
        evaluations: 0,
    };
    let ratio = (opts.t_max / opts.t_min).ln() / (opts.scan_points - 1) as f64;
    let scan_time = |i: usize| {
        if i == opts.scan_points - 1 {
            opts.t_max
        } else {
            opts.t_min * (ratio * i as f64).exp()
        }
    };

    let mut below: Option<f64> = None;
    for i in 0..opts.scan_points {
        let t = scan_time(i);
        if probe.error(t)? >= epsilon {
            let Some(mut lo) = below else {
                return Ok(StorageResult {
                    t_store: t,
                    epsilon,
                    bracket: (t, t),
                    evaluations: probe.evaluations,
                    floor: true,
                    criterion: opts.criterion,
                });
            };
            let mut hi = t;
            while hi / lo > 1.0 + opts.rel_width {
                let mid = (lo * hi).sqrt();
                if probe.error(mid)? >= epsilon {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(StorageResult {
                t_store: (lo * hi).sqrt(),
                epsilon,
                bracket: (lo, hi),
                evaluations: probe.evaluations,
                floor: false,
                criterion: opts.criterion,
            });
        }
        below = Some(t);
    }
    Err(Error::RangeExhausted {
        epsilon,
        t_min: opts.t_min,
        t_max: opts.t_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinPulsesResult {
    pub scheme: Scheme,
    pub n: usize,
    /// Storage time at `n`; infinite when the error never reaches epsilon in the scan range.
    pub storage_time: f64,
    /// Storage time at `n - 1`, if `n > 0`.
    pub previous_storage_time: Option<f64>,
    /// The storage time was found to decrease somewhere with growing `n`.
    pub monotonicity_violation: bool,
    pub storage_evaluations: usize,
}

struct StorageCache<'a> {
    scheme: Scheme,
    bath: &'a Bath,
    epsilon: f64,
    opts: &'a StorageOptions,
    quad: &'a QuadratureSpec,
    known: BTreeMap<usize, f64>,
}

impl StorageCache<'_> {
    fn get(&mut self, n: usize) -> Result<f64> {
        if let Some(&v) = self.known.get(&n) {
            return Ok(v);
        }
        let seq = PulseSequence::generate(self.scheme, n)?;
        let v = match storage_time_with(&seq, self.bath, self.epsilon, self.opts, self.quad) {
            Ok(r) => r.t_store,
            Err(Error::RangeExhausted { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        self.known.insert(n, v);
        Ok(v)
    }
}

/// Smallest pulse count whose storage time reaches `t_target`.
pub fn min_pulses(
    scheme: Scheme,
    bath: &Bath,
    epsilon: f64,
    t_target: f64,
    quad: &QuadratureSpec,
) -> Result<MinPulsesResult> {
    min_pulses_with(
        scheme,
        bath,
        epsilon,
        t_target,
        &StorageOptions::default(),
        quad,
    )
}

/// Doubling then binary search over `n`, assuming the storage time grows with
/// `n`. The answer is re-checked against its neighbours; a violation triggers
/// a linear scan from zero and is reported in the result.
pub fn min_pulses_with(
    scheme: Scheme,
    bath: &Bath,
    epsilon: f64,
    t_target: f64,
    opts: &StorageOptions,
    quad: &QuadratureSpec,
) -> Result<MinPulsesResult> {
    if scheme == Scheme::Custom {
        return Err(Error::Domain(
            "pulse-count search needs a generated scheme".into(),
        ));
    }
    if !(t_target > 0.0) {
        return Err(Error::Domain(format!(
            "t_target must be > 0, got {t_target}"
        )));
    }
    let mut cache = StorageCache {
        scheme,
        bath,
        epsilon,
        opts,
        quad,
        known: BTreeMap::new(),
    };
    let reaches =
        |cache: &mut StorageCache, n: usize| -> Result<bool> { Ok(cache.get(n)? >= t_target) };

    let mut n = if reaches(&mut cache, 0)? {
        0
    } else {
        let mut hi = 1;
        while !reaches(&mut cache, hi)? {
            if hi >= MAX_PULSES {
                return Err(Error::SearchExhausted { n_max: MAX_PULSES });
            }
            hi = (hi * 2).min(MAX_PULSES);
        }
        let mut lo = hi / 2;
        // invariant: lo fails (or is 0 which failed), hi succeeds
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(&mut cache, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let mut violation = false;
    if n > 0 && reaches(&mut cache, n - 1)? {
        violation = true;
    }
    if n < MAX_PULSES && !reaches(&mut cache, n + 1)? {
        violation = true;
    }
    let known: Vec<f64> = cache.known.values().copied().collect();
    if known.windows(2).any(|w| w[1] < w[0]) {
        violation = true;
    }
    if violation {
        let limit = n;
        n = (0..=limit)
            .find(|&k| reaches(&mut cache, k).unwrap_or(false))
            .unwrap_or(limit);
    }
    let storage_time = cache.get(n)?;
    let previous_storage_time = if n > 0 { Some(cache.get(n - 1)?) } else { None };
    Ok(MinPulsesResult {
        scheme,
        n,
        storage_time,
        previous_storage_time,
        monotonicity_violation: violation,
        storage_evaluations: cache.known.len(),
    })
}

/// Parameters of a two-scheme sweep over ohmic baths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// When set, storage times of both schemes are compared at this threshold.
    pub epsilon: Option<f64>,
    pub criterion: ErrorCriterion,
    pub omega_d: f64,
}

impl CompareSpec {
    pub fn new(n: usize, alphas: Vec<f64>, temperatures: Vec<f64>, t_grid: Vec<f64>) -> Self {
        Self {
            n,
            alphas,
            temperatures,
            t_grid,
            epsilon: None,
            criterion: ErrorCriterion::Envelope,
            omega_d: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub n: usize,
    pub alpha: f64,
    pub temperature: f64,
    pub t: f64,
    pub phi: f64,
    pub chi: f64,
    pub s: f64,
    pub one_minus_s: f64,
    pub envelope_error: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageComparison {
    pub alpha: f64,
    pub temperature: f64,
    pub epsilon: f64,
    pub equidistant: Option<f64>,
    pub udd: Option<f64>,
    /// `udd / equidistant`
    pub ratio: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub spec: CompareSpec,
    pub quad: QuadratureSpec,
    pub rows: Vec<SweepRow>,
    pub storage: Vec<StorageComparison>,
}

const SCHEMES: [Scheme; 2] = [Scheme::Equidistant, Scheme::Udd];

/// Signal of both schemes over the Cartesian grid, rows ordered by
/// `(scheme, alpha, T, t)`. Cell failures are recorded in the row, not raised.
pub fn compare_schemes(spec: &CompareSpec, quad: &QuadratureSpec) -> Result<SweepTable> {
    quad.validate()?;
    if spec.alphas.is_empty() || spec.temperatures.is_empty() {
        return Err(Error::Domain(
            "compare needs at least one alpha and one temperature".into(),
        ));
    }
    if spec.t_grid.windows(2).any(|w| w[1] < w[0]) || spec.t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Domain(
            "time grid must be ascending and nonnegative".into(),
        ));
    }
    let mut cells = Vec::new();
    for scheme in SCHEMES {
        for &alpha in &spec.alphas {
            for &temperature in &spec.temperatures {
                cells.push((scheme, alpha, temperature));
            }
        }
    }
    let blocks: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(scheme, alpha, temperature)| sweep_cell(spec, quad, scheme, alpha, temperature))
        .collect();

    let storage = match spec.epsilon {
        None => Vec::new(),
        Some(epsilon) => {
            let pairs: Vec<(f64, f64)> = spec
                .alphas
                .iter()
                .flat_map(|&a| spec.temperatures.iter().map(move |&t| (a, t)))
                .collect();
            pairs
                .par_iter()
                .map(|&(alpha, temperature)| {
                    compare_storage(spec, quad, alpha, temperature, epsilon)
                })
                .collect()
        }
    };

    Ok(SweepTable {
        spec: spec.clone(),
        quad: *quad,
        rows: blocks.into_iter().flatten().collect(),
        storage,
    })
}

fn sweep_cell(
    spec: &CompareSpec,
    quad: &QuadratureSpec,
    scheme: Scheme,
    alpha: f64,
    temperature: f64,
) -> Vec<SweepRow> {
    let blank = |t: f64, msg: String| SweepRow {
        scheme,
        n: spec.n,
        alpha,
        temperature,
        t,
        phi: f64::NAN,
        chi: f64::NAN,
        s: f64::NAN,
        one_minus_s: f64::NAN,
        envelope_error: f64::NAN,
        error: Some(msg),
    };
    let bath: Bath = match OhmicBath::new(alpha, spec.omega_d, temperature) {
        Ok(b) => b.into(),
        Err(e) => {
            return spec
                .t_grid
                .iter()
                .map(|&t| blank(t, e.to_string()))
                .collect()
        }
    };
    let seq = PulseSequence::generate(scheme, spec.n).expect("generated scheme");
    let eval = match Decoherence::new(&seq, &bath, quad) {
        Ok(e) => e,
        Err(e) => {
            return spec
                .t_grid
                .iter()
                .map(|&t| blank(t, e.to_string()))
                .collect()
        }
    };
    spec.t_grid
        .iter()
        .map(|&t| match eval.signal(t) {
            Ok(p) => SweepRow {
                scheme,
                n: spec.n,
                alpha,
                temperature,
                t,
                phi: p.phi,
                chi: p.chi,
                s: p.signal,
                one_minus_s: p.one_minus_s,
                envelope_error: p.envelope_error,
                error: None,
            },
            Err(e) => blank(t, e.to_string()),
        })
        .collect()
}

fn compare_storage(
    spec: &CompareSpec,
    quad: &QuadratureSpec,
    alpha: f64,
    temperature: f64,
    epsilon: f64,
) -> StorageComparison {
    let opts = StorageOptions {
        criterion: spec.criterion,
        ..StorageOptions::default()
    };
    let run = |scheme: Scheme| -> Result<f64> {
        let bath: Bath = OhmicBath::new(alpha, spec.omega_d, temperature)?.into();
        let seq = PulseSequence::generate(scheme, spec.n)?;
        Ok(storage_time_with(&seq, &bath, epsilon, &opts, quad)?.t_store)
    };
    let (eq, udd) = rayon::join(|| run(Scheme::Equidistant), || run(Scheme::Udd));
    let error = [&eq, &udd]
        .iter()
        .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
        .reduce(|a, b| format!("{a}; {b}"));
    let equidistant = eq.ok();
    let udd = udd.ok();
    StorageComparison {
        alpha,
        temperature,
        epsilon,
        equidistant,
        udd,
        ratio: equidistant.zip(udd).map(|(e, u)| u / e),
        error,
    }
}
