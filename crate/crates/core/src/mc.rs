//! Monte Carlo signal for classical Gaussian noise.
//!
//! Trajectories are sums of random-amplitude modes,
//! `f(t) = sum_k sigma_k (a_k cos w_k t + b_k sin w_k t)`, with `w_k` the
//! midpoints of `mode_count` equal bins on `[0, omega_max]`,
//! `sigma_k^2 = p(w_k) dw / pi` and `a_k, b_k` independent standard normals.
//! The autocovariance then approaches `g(tau) = (1/pi) int p(w) cos(w tau) dw`.
//!
//! Seeds: trajectory `k` of a run with base seed `s` draws from a ChaCha8
//! generator seeded with [`split_seed`]`(s, k)`, the `k`-th output of a
//! SplitMix64 stream started at `s`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::ClassicalBath;
use crate::error::{Error, Result};
use crate::sequences::PulseSequence;
use crate::special::pairwise_sum;

pub const MIN_MODES: usize = 8;
pub const MIN_SAMPLES: usize = 100;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trajectory `index`: `mix64(base + (index + 1) * 0x9e3779b97f4a7c15)`.
pub fn split_seed(base: u64, index: u64) -> u64 {
    mix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Largest admissible grid step for a spectrum cut off at `omega_max`.
pub fn max_step(omega_max: f64) -> f64 {
    std::f64::consts::PI / (4.0 * omega_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega: f64,
    /// `sigma_k a_k`
    pub cos_amp: f64,
    /// `sigma_k b_k`
    pub sin_amp: f64,
}

/// One noise realization sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub mode_count: usize,
    pub modes: Vec<Mode>,
}

impl Trajectory {
    /// `f(t)` from the mode sum, valid off the grid as well.
    pub fn eval(&self, t: f64) -> f64 {
        let terms: Vec<f64> = self
            .modes
            .iter()
            .map(|m| {
                let (s, c) = (m.omega * t).sin_cos();
                m.cos_amp * c + m.sin_amp * s
            })
            .collect();
        pairwise_sum(&terms)
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

struct ModeGrid {
    omegas: Vec<f64>,
    sigmas: Vec<f64>,
}

fn mode_grid(bath: &ClassicalBath, mode_count: usize) -> Result<ModeGrid> {
    if mode_count < MIN_MODES {
        return Err(Error::Domain(format!(
            "mode_count must be >= {MIN_MODES}, got {mode_count}"
        )));
    }
    let dw = bath.omega_max() / mode_count as f64;
    let omegas: Vec<f64> = (0..mode_count).map(|k| (k as f64 + 0.5) * dw).collect();
    let sigmas = omegas
        .iter()
        .map(|&w| (bath.power_spectrum(w) * dw / std::f64::consts::PI).sqrt())
        .collect();
    Ok(ModeGrid { omegas, sigmas })
}

fn check_step(bath: &ClassicalBath, dt: f64) -> Result<()> {
    let limit = max_step(bath.omega_max());
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    if dt > limit {
        return Err(Error::Aliasing { dt, limit });
    }
    Ok(())
}

/// Uniform grid on `[0, t_max]` with step at most `dt`.
fn uniform_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let steps = (t_max / dt).ceil().max(1.0) as usize;
    let h = t_max / steps as f64;
    (0..=steps)
        .map(|k| if k == steps { t_max } else { k as f64 * h })
        .collect()
}

fn draw_modes(grid: &ModeGrid, seed: u64) -> Vec<Mode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grid.omegas
        .iter()
        .zip(&grid.sigmas)
        .map(|(&omega, &sigma)| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Mode {
                omega,
                cos_amp: sigma * a,
                sin_amp: sigma * b,
            }
        })
        .collect()
}

/// Draws one trajectory on a uniform grid over `[0, t_max]`.
pub fn synthesize(
    bath: &ClassicalBath,
    t_max: f64,
    dt: f64,
    mode_count: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_step(bath, dt)?;
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::Domain(format!("t_max must be >= 0, got {t_max}")));
    }
    let grid = mode_grid(bath, mode_count)?;
    let modes = draw_modes(&grid, seed);
    let times = uniform_grid(t_max, dt);
    let mut traj = Trajectory {
        times,
        values: Vec::new(),
        seed,
        mode_count,
        modes,
    };
    traj.values = traj.times.iter().map(|&t| traj.eval(t)).collect();
    Ok(traj)
}

/// Trapezoid nodes on `[0, t]` with each pulse instant inserted, and the
/// toggling sign on each following segment.
fn toggled_nodes(grid: &[f64], seq: &PulseSequence, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes: Vec<f64> = grid.iter().copied().filter(|&s| s < t).collect();
    nodes.push(t);
    nodes.extend(seq.pulse_times(t));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let pulses: Vec<f64> = seq.pulse_times(t).collect();
    let signs = nodes
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let flips = pulses.partition_point(|&p| p < mid);
            if flips % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    (nodes, signs)
}

/// `int_0^t f(s) c(s) ds` by the trapezoid rule, `c` the toggling sign of `seq`.
pub fn toggled_phase(traj: &Trajectory, seq: &PulseSequence, t: f64) -> Result<f64> {
    if !(t >= 0.0) || t > traj.t_max() {
        return Err(Error::Domain(format!(
            "t = {t} outside the trajectory range [0, {}]",
            traj.t_max()
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let (nodes, signs) = toggled_nodes(&traj.times, seq, t);
    let value = |s: f64| match traj.times.binary_search_by(|x| x.total_cmp(&s)) {
        Ok(i) if i < traj.values.len() => traj.values[i],
        _ => traj.eval(s),
    };
    let f: Vec<f64> = nodes.iter().map(|&s| value(s)).collect();
    let pieces: Vec<f64> = nodes
        .windows(2)
        .zip(f.windows(2))
        .zip(&signs)
        .map(|((x, y), c)| c * 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .collect();
    Ok(pairwise_sum(&pieces))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub dt: f64,
    pub mode_count: usize,
}

impl McConfig {
    /// 10^4 samples, 512 modes and an eighth of the largest admissible step.
    ///
    /// At the aliasing limit the trapezoid rule still underestimates the phase
    /// variance by a few percent near `omega_max`; an eighth brings that below
    /// the statistical error of 10^4 samples.
    pub fn for_bath(bath: &ClassicalBath, seed: u64) -> Self {
        Self {
            samples: 10_000,
            seed,
            dt: max_step(bath.omega_max()) / 8.0,
            mode_count: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    /// Sample mean of `cos(phase)`.
    pub mean: f64,
    /// Sample standard deviation over `sqrt(samples)`.
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// Sample mean of `phase^2`.
    pub phase_variance: f64,
}

/// Estimates the signal `<cos phase>` at time `t`.
///
/// The toggled trapezoid integral is linear in the mode amplitudes, so each
/// mode's cosine and sine projections are computed once and every trajectory
/// reduces to a dot product with its random amplitudes.
pub fn mc_signal(
    bath: &ClassicalBath,
    seq: &PulseSequence,
    t: f64,
    config: &McConfig,
) -> Result<McEstimate> {
    check_step(bath, config.dt)?;
    if config.samples < MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "samples must be >= {MIN_SAMPLES}, got {}",
            config.samples
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let grid = mode_grid(bath, config.mode_count)?;
    let projections = if t == 0.0 {
        vec![(0.0, 0.0); grid.omegas.len()]
    } else {
        let (nodes, signs) = toggled_nodes(&uniform_grid(t, config.dt), seq, t);
        grid.omegas
            .par_iter()
            .map(|&w| {
                let trig: Vec<(f64, f64)> = nodes.iter().map(|&s| (w * s).sin_cos()).collect();
                let mut cos_part = Vec::with_capacity(signs.len());
                let mut sin_part = Vec::with_capacity(signs.len());
                for ((x, g), c) in nodes.windows(2).zip(trig.windows(2)).zip(&signs) {
                    let h = c * 0.5 * (x[1] - x[0]);
                    cos_part.push(h * (g[0].1 + g[1].1));
                    sin_part.push(h * (g[0].0 + g[1].0));
                }
                (pairwise_sum(&cos_part), pairwise_sum(&sin_part))
            })
            .collect()
    };

    let phases: Vec<f64> = (0..config.samples as u64)
        .into_par_iter()
        .map(|k| {
            let modes = draw_modes(&grid, split_seed(config.seed, k));
            let terms: Vec<f64> = modes
                .iter()
                .zip(&projections)
                .map(|(m, (pc, ps))| m.cos_amp * pc + m.sin_amp * ps)
                .collect();
            pairwise_sum(&terms)
        })
        .collect();

    let n = phases.len() as f64;
    let cosines: Vec<f64> = phases.iter().map(|p| p.cos()).collect();
    let mean = pairwise_sum(&cosines) / n;
    let squares: Vec<f64> = cosines.iter().map(|c| (c - mean) * (c - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1.0);
    let phase_sq: Vec<f64> = phases.iter().map(|p| p * p).collect();
    Ok(McEstimate {
        mean,
        stderr: (variance / n).sqrt(),
        samples: config.samples,
        seed: config.seed,
        phase_variance: pairwise_sum(&phase_sq) / n,
    })
}
