//! Phase `phi_n(t)`, decoherence exponent `chi_n(t)` and signal
//! `s_n(t) = cos(2 phi_n) exp(-2 chi_n)`.
//!
//! ```text
//! phi_n(t) = int_0^cut J(w) / (2 w^2) x_n(w t) dw
//! chi_n(t) = int_0^cut W(w) / (4 w^2) |y_n(w t)|^2 dw
//! ```
//!
//! `W` is [`Bath::integrand_weight`]: `J coth(w / 2T)` for quantum baths and
//! `p / pi` for classical noise, whose phase vanishes.

use rayon::prelude::*;
use serde::Serialize;

use crate::bath::Bath;
use crate::error::{Error, Result};
use crate::filters::FilterKernel;
use crate::quadrature::{integrate, panel_edges, Integral, QuadratureSpec};
use crate::sequences::{PulseSequence, Scheme};

/// `exp(-2 chi)` underflows beyond this exponent.
pub const CHI_SATURATION: f64 = 350.0;

/// Relative position below which integrands use their `w -> 0` limit.
const SMALL_OMEGA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherencePoint {
    pub t: f64,
    pub phi: f64,
    pub chi: f64,
    pub signal: f64,
    /// `1 - s`, evaluated without cancellation.
    pub one_minus_s: f64,
    /// `1 - exp(-2 chi)`: the loss of coherence with the deterministic phase removed.
    pub envelope_error: f64,
    /// Estimated absolute quadrature error on `chi`.
    pub quad_error: f64,
    /// Set when `chi` hit [`CHI_SATURATION`] and the signal was reported as zero.
    pub saturated: bool,
}

impl CoherencePoint {
    fn assemble(t: f64, phi: f64, chi: f64, quad_error: f64) -> Self {
        if chi >= CHI_SATURATION {
            return Self {
                t,
                phi,
                chi: CHI_SATURATION,
                signal: 0.0,
                one_minus_s: 1.0,
                envelope_error: 1.0,
                quad_error,
                saturated: true,
            };
        }
        let decay = (-2.0 * chi).exp();
        let envelope_error = -(-2.0 * chi).exp_m1();
        let s = phi.sin();
        Self {
            t,
            phi,
            chi,
            signal: (2.0 * phi).cos() * decay,
            one_minus_s: 2.0 * s * s * decay + envelope_error,
            envelope_error,
            quad_error,
            saturated: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoherenceCurve {
    pub scheme: Scheme,
    pub n: usize,
    pub bath: String,
    pub points: Vec<CoherencePoint>,
}

/// Reusable evaluator for one sequence and bath.
#[derive(Debug, Clone)]
pub struct Decoherence<'a> {
    kernel: FilterKernel,
    bath: &'a Bath,
    quad: QuadratureSpec,
    breakpoints: Vec<f64>,
}

impl<'a> Decoherence<'a> {
    pub fn new(seq: &PulseSequence, bath: &'a Bath, quad: &QuadratureSpec) -> Result<Self> {
        quad.validate()?;
        Ok(Self {
            kernel: FilterKernel::new(seq),
            bath,
            quad: *quad,
            breakpoints: bath.breakpoints(),
        })
    }

    /// One initial panel per half period of the fastest filter oscillation, `pi / t`.
    fn edges(&self, t: f64) -> Vec<f64> {
        let cut = self.bath.omega_cut();
        let count = ((cut * t / std::f64::consts::PI).ceil() as usize).max(16);
        panel_edges(0.0, cut, count, &self.breakpoints)
    }

    pub fn chi(&self, t: f64) -> Result<Integral> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(Integral::zero());
        }
        let small = SMALL_OMEGA * self.bath.omega_cut();
        let moment_sq = (t * self.kernel.first_moment()).powi(2);
        let integrand = |w: f64| {
            let weight = self.bath.weight_unchecked(w);
            if weight == 0.0 {
                return 0.0;
            }
            if w < small {
                0.25 * weight * moment_sq
            } else {
                weight / (4.0 * w * w) * self.kernel.y_abs_sq(w * t).0
            }
        };
        integrate(integrand, &self.edges(t), &self.quad)
    }

    pub fn phase(&self, t: f64) -> Result<Integral> {
        check_time(t)?;
        if t == 0.0 || self.bath.is_classical() {
            return Ok(Integral::zero());
        }
        let small = SMALL_OMEGA * self.bath.omega_cut();
        let slope = t * self.kernel.x_slope();
        let integrand = |w: f64| {
            let j = self.bath.density_unchecked(w);
            if j == 0.0 {
                return 0.0;
            }
            if w < small {
                j / (2.0 * w) * slope
            } else {
                j / (2.0 * w * w) * self.kernel.x(w * t)
            }
        };
        integrate(integrand, &self.edges(t), &self.quad)
    }

    pub fn signal(&self, t: f64) -> Result<CoherencePoint> {
        let chi = self.chi(t)?;
        let phi = self.phase(t)?;
        Ok(CoherencePoint::assemble(
            t,
            phi.value,
            chi.value,
            chi.abs_error,
        ))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "time must be finite and >= 0, got {t}"
        )))
    }
}

/// Decoherence exponent `chi_n(t)`.
pub fn chi(seq: &PulseSequence, bath: &Bath, t: f64, quad: &QuadratureSpec) -> Result<Integral> {
    Decoherence::new(seq, bath, quad)?.chi(t)
}

/// Phase `phi_n(t)`; identically zero for classical baths.
pub fn phase(seq: &PulseSequence, bath: &Bath, t: f64, quad: &QuadratureSpec) -> Result<Integral> {
    Decoherence::new(seq, bath, quad)?.phase(t)
}

pub fn signal(
    seq: &PulseSequence,
    bath: &Bath,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<CoherencePoint> {
    Decoherence::new(seq, bath, quad)?.signal(t)
}

/// Evaluates the signal on every grid time, in parallel.
pub fn coherence_curve(
    seq: &PulseSequence,
    bath: &Bath,
    t_grid: &[f64],
    quad: &QuadratureSpec,
) -> Result<CoherenceCurve> {
    for (i, &t) in t_grid.iter().enumerate() {
        check_time(t)?;
        if i > 0 && t < t_grid[i - 1] {
            return Err(Error::Domain(format!(
                "time grid must be ascending; entry {i} ({t}) follows {}",
                t_grid[i - 1]
            )));
        }
    }
    let eval = Decoherence::new(seq, bath, quad)?;
    let points = t_grid
        .par_iter()
        .map(|&t| {
            eval.signal(t).map_err(|e| Error::AtTime {
                t,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoherenceCurve {
        scheme: seq.scheme(),
        n: seq.n(),
        bath: bath.label(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{ClassicalBath, OhmicBath};
    use approx::assert_relative_eq;

    fn ohmic(alpha: f64, temperature: f64) -> Bath {
        OhmicBath::new(alpha, 1.0, temperature).unwrap().into()
    }

    fn quad() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn free_evolution_examples() {
        let b = ohmic(0.1, 0.0);
        let free = PulseSequence::equidistant(0);
        // alpha (gamma + ln t - Ci t) and alpha Si t at t = 1, 40-digit references
        let c = chi(&free, &b, 1.0, &quad()).unwrap();
        assert!((c.value - 0.023_981_174_200_056_474).abs() < 1e-12);
        let p = phase(&free, &b, 1.0, &quad()).unwrap();
        assert!((p.value - 0.094_608_307_036_718_31).abs() < 1e-12);
        let s = signal(&free, &b, 1.0, &quad()).unwrap();
        assert!((s.signal - 0.936_157_391_058_491_3).abs() < 1e-11);
        assert_relative_eq!(
            s.signal,
            (2.0 * s.phi).cos() * (-2.0 * s.chi).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn trivial_cases() {
        let seqs = [
            PulseSequence::udd(4),
            PulseSequence::equidistant(3),
            PulseSequence::equidistant(0),
        ];
        let free_bath = ohmic(0.0, 0.3);
        let warm = ohmic(0.2, 0.3);
        for seq in &seqs {
            assert_eq!(chi(seq, &free_bath, 7.0, &quad()).unwrap().value, 0.0);
            assert_eq!(signal(seq, &free_bath, 7.0, &quad()).unwrap().signal, 1.0);
            let at_zero = signal(seq, &warm, 0.0, &quad()).unwrap();
            assert_eq!((at_zero.chi, at_zero.phi, at_zero.signal), (0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn classical_phase_vanishes() {
        let c: Bath = ClassicalBath::flat(0.3, 2.0).unwrap().into();
        for seq in [PulseSequence::udd(3), PulseSequence::equidistant(0)] {
            assert_eq!(phase(&seq, &c, 4.0, &quad()).unwrap().value, 0.0);
            assert!(chi(&seq, &c, 4.0, &quad()).unwrap().value > 0.0);
        }
    }

    #[test]
    fn negative_time_rejected() {
        let b = ohmic(0.1, 0.0);
        assert!(chi(&PulseSequence::udd(1), &b, -1.0, &quad()).is_err());
    }

    #[test]
    fn saturation_clamps_signal() {
        let p = CoherencePoint::assemble(1.0, 0.2, 400.0, 0.0);
        assert!(p.saturated);
        assert_eq!((p.chi, p.signal), (CHI_SATURATION, 0.0));
        let strong: Bath = ClassicalBath::flat(1e3, 1.0).unwrap().into();
        let s = signal(&PulseSequence::equidistant(0), &strong, 5.0, &quad()).unwrap();
        assert!(s.saturated && s.signal == 0.0);
    }

    #[test]
    fn one_minus_s_without_cancellation() {
        let p = CoherencePoint::assemble(1.0, 1e-6, 1e-9, 0.0);
        assert_relative_eq!(p.one_minus_s, 2e-12 + 2e-9, max_relative = 1e-6);
        assert_relative_eq!(p.envelope_error, 2e-9, max_relative = 1e-8);
    }

    #[test]
    fn temperature_increases_chi() {
        let seq = PulseSequence::equidistant(3);
        let mut prev = 0.0;
        for temp in [0.0, 0.05, 0.1, 0.5, 2.0] {
            let c = chi(&seq, &ohmic(0.1, temp), 6.0, &quad()).unwrap().value;
            assert!(c >= prev, "T={temp}");
            prev = c;
        }
    }

    #[test]
    fn classical_path_matches_quantum() {
        let q = ohmic(0.2, 0.1);
        let c: Bath = ClassicalBath::from_quantum(&q).unwrap().into();
        for seq in [PulseSequence::udd(5), PulseSequence::equidistant(2)] {
            for t in [0.5, 3.0, 40.0] {
                let a = chi(&seq, &q, t, &quad()).unwrap().value;
                let b = chi(&seq, &c, t, &quad()).unwrap().value;
                assert_relative_eq!(a, b, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn udd_plateau() {
        let b = ohmic(0.25, 0.0);
        for n in [10usize, 20] {
            let seq = PulseSequence::udd(n);
            for k in 1..=10 {
                let t = 0.5 * (n + 1) as f64 * k as f64 / 10.0;
                let c = chi(&seq, &b, t, &quad()).unwrap().value;
                assert!(c < 1e-8, "n={n} t={t} chi={c}");
            }
        }
    }

    #[test]
    fn tabulated_ohmic_matches_builtin() {
        use crate::bath::TabulatedSpectralDensity;
        let table = TabulatedSpectralDensity::new(vec![(0.0, 0.0), (1.0, 0.2)]).unwrap();
        let tab = Bath::tabulated(table, 0.1).unwrap();
        let q = ohmic(0.1, 0.1);
        let seq = PulseSequence::udd(3);
        let a = signal(&seq, &tab, 5.0, &quad()).unwrap();
        let b = signal(&seq, &q, 5.0, &quad()).unwrap();
        assert_relative_eq!(a.chi, b.chi, max_relative = 1e-9);
        assert_relative_eq!(a.phi, b.phi, max_relative = 1e-9);
    }

    #[test]
    fn curve_shape_and_errors() {
        let b = ohmic(0.001, 0.0);
        let c = coherence_curve(&PulseSequence::udd(0), &b, &[0.0], &quad()).unwrap();
        assert_eq!(c.points.len(), 1);
        let p = c.points[0];
        assert_eq!((p.t, p.phi, p.chi, p.signal), (0.0, 0.0, 0.0, 1.0));

        let c = coherence_curve(&PulseSequence::udd(2), &b, &[0.1, 1.0, 10.0], &quad()).unwrap();
        assert_eq!(c.points.len(), 3);
        assert!(c.points.windows(2).all(|w| w[0].t < w[1].t));

        assert!(coherence_curve(&PulseSequence::udd(2), &b, &[1.0, 0.5], &quad()).is_err());
    }

    #[test]
    fn free_envelope_decays_monotonically() {
        let b = ohmic(0.1, 0.0);
        let grid: Vec<f64> = (0..40)
            .map(|i| 10f64.powf(-2.0 + 5.0 * i as f64 / 39.0))
            .collect();
        let c = coherence_curve(&PulseSequence::equidistant(0), &b, &grid, &quad()).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].chi > w[0].chi);
        }
    }
}
