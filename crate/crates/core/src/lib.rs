//! Coherence of a single dephasing qubit under ideal pi-pulse sequences.
//!
//! The qubit couples linearly to a bosonic bath (or classical Gaussian noise)
//! through `sigma_z`, so its signal is known in closed form up to two frequency
//! integrals. This crate evaluates those integrals for arbitrary pulse
//! sequences, compares equidistant and optimized (UDD) timings, and checks the
//! classical-noise limit against a Monte Carlo simulation.
//!
//! Units: frequencies in `omega_d`, times in `t_c = 1 / omega_d`, temperatures
//! as energies with `k_B = hbar = 1`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analysis;
pub mod bath;
pub mod decoherence;
pub mod error;
pub mod filters;
pub mod mc;
pub mod quadrature;
pub mod sequences;
pub mod special;

pub use analysis::{
    compare_schemes, min_pulses, min_pulses_with, storage_time, storage_time_with, CompareSpec,
    ErrorCriterion, MinPulsesResult, StorageComparison, StorageOptions, StorageResult, SweepRow,
    SweepTable,
};
pub use bath::{thermal_weight, Bath, ClassicalBath, OhmicBath, TabulatedSpectralDensity};
pub use decoherence::{
    chi, coherence_curve, phase, signal, CoherenceCurve, CoherencePoint, Decoherence,
};
pub use error::{Error, Result};
pub use filters::{
    bessel_approx, equidistant_closed_form, filter_value, x_factor, y_abs_sq, y_factor,
    FilterSource, FilterValue,
};
pub use mc::{mc_signal, split_seed, synthesize, toggled_phase, McConfig, McEstimate, Trajectory};
pub use quadrature::{Integral, PanelRule, QuadratureSpec};
pub use sequences::{PulseSequence, Scheme};
