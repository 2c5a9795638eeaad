//! Filter factors of a pulse sequence.
//!
//! For normalized instants `delta_m` and `z = omega t`:
//!
//! * phase factor `x_n(z) = (-1)^n sin z + sum_m (-1)^{m+1} sin(z delta_m)`
//! * coherence factor `y_n(z) = 1 + (-1)^{n+1} e^{iz} + 2 sum_m (-1)^m e^{i z delta_m}`
//!
//! `y_n` is a sum of `n + 2` terms of modulus up to 2 whose total vanishes like
//! `z^{n+1}` for the optimized sequence, so it is accumulated as
//! `sum_k c_k (e^{i z d_k} - 1)` (the constants cancel exactly because
//! `sum_k c_k = 0`) with compensated summation. For the optimized sequence the
//! Jacobi-Anger expansion gives the exact representation
//!
//! `y_n(z) = 4(n+1) e^{iz/2} sum_{m>=0} (-i)^{k_m} J_{k_m}(z/2)`, `k_m = (2m+1)(n+1)`,
//!
//! which takes over once the direct sum can no longer resolve `|y_n|`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sequences::{PulseSequence, Scheme};
use crate::special::{bessel_j, bessel_j_core, ln_factorial, CompensatedSum};

/// Relative resolution demanded from the direct sum before the series takes over.
const DIRECT_RESOLUTION: f64 = 1e9 * f64::EPSILON;

/// Odd multiples of `n + 1` kept in the Jacobi-Anger series.
const SERIES_TERMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterSource {
    /// Compensated summation of the defining sum.
    Direct,
    /// Bessel-function representation of the optimized sequence.
    BesselSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterValue {
    pub z: f64,
    pub x: f64,
    pub y: Complex64,
    pub y_abs_sq: f64,
    pub source: FilterSource,
}

/// Per-sequence constants for repeated filter evaluation.
#[derive(Debug, Clone)]
pub(crate) struct FilterKernel {
    n: usize,
    /// `(c_k, d_k)` with `y = sum c_k (e^{i z d_k} - 1)`.
    y_terms: Vec<(f64, f64)>,
    /// `(s_m, delta_m)` with `x = (-1)^n sin z + sum s_m sin(z delta_m)`.
    x_terms: Vec<(f64, f64)>,
    /// `sum c_k d_k`; `|y|^2 ~ (z * first_moment)^2` as `z -> 0`.
    first_moment: f64,
    /// `x ~ z * x_slope` as `z -> 0`.
    x_slope: f64,
    udd: Option<UddSeries>,
}

#[derive(Debug, Clone)]
struct UddSeries {
    order: u32,
    ln_factorials: [f64; SERIES_TERMS],
    /// `ln(4(n+1)) - ln((n+1)!)`
    ln_bound_offset: f64,
}

impl FilterKernel {
    pub(crate) fn new(seq: &PulseSequence) -> Self {
        let n = seq.n();
        let mut y_terms = Vec::with_capacity(n + 1);
        let mut x_terms = Vec::with_capacity(n);
        for (i, &d) in seq.deltas().iter().enumerate() {
            let m = i + 1;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            y_terms.push((2.0 * sign, d));
            x_terms.push((-sign, d));
        }
        let end_sign = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
        y_terms.push((end_sign, 1.0));

        let first_moment = y_terms
            .iter()
            .map(|&(c, d)| c * d)
            .collect::<CompensatedSum>()
            .value();
        let mut slope = CompensatedSum::new();
        slope.add(-end_sign);
        for &(s, d) in &x_terms {
            slope.add(s * d);
        }

        let udd = (seq.scheme() == Scheme::Udd && n >= 1).then(|| {
            let order = (n + 1) as u32;
            let mut ln_factorials = [0.0; SERIES_TERMS];
            for (m, lf) in ln_factorials.iter_mut().enumerate() {
                *lf = ln_factorial(((2 * m + 1) * (n + 1)) as u64);
            }
            UddSeries {
                order,
                ln_factorials,
                ln_bound_offset: (4.0 * order as f64).ln() - ln_factorials[0],
            }
        });

        Self {
            n,
            y_terms,
            x_terms,
            first_moment,
            x_slope: slope.value(),
            udd,
        }
    }

    pub(crate) fn first_moment(&self) -> f64 {
        self.first_moment
    }

    pub(crate) fn x_slope(&self) -> f64 {
        self.x_slope
    }

    pub(crate) fn x(&self, z: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        let lead = z.sin();
        acc.add(if self.n.is_multiple_of(2) {
            lead
        } else {
            -lead
        });
        for &(s, d) in &self.x_terms {
            acc.add(s * (z * d).sin());
        }
        acc.value()
    }

    pub(crate) fn y_direct(&self, z: f64) -> Complex64 {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for &(c, d) in &self.y_terms {
            // e^{i theta} - 1 = -2 sin^2(theta/2) + 2i sin(theta/2) cos(theta/2)
            let (s, co) = (0.5 * z * d).sin_cos();
            re.add(-2.0 * c * s * s);
            im.add(2.0 * c * s * co);
        }
        Complex64::new(re.value(), im.value())
    }

    /// Whether the direct sum cannot resolve `|y|` at `z` to [`DIRECT_RESOLUTION`].
    fn prefers_series(&self, z: f64) -> bool {
        let Some(series) = &self.udd else {
            return false;
        };
        if z <= 0.0 {
            return false;
        }
        // (x/2)^k / k! bounds |J_k(x)| for x >= 0
        let ln_bound = series.ln_bound_offset + series.order as f64 * (0.25 * z).ln();
        let scale = 4.0 * series.order as f64 * z.min(2.0);
        ln_bound < (DIRECT_RESOLUTION * scale).ln()
    }

    fn y_series(&self, z: f64) -> Complex64 {
        let series = self
            .udd
            .as_ref()
            .expect("series requested for a non-UDD kernel");
        let x = 0.5 * z;
        let k0 = series.order as u64;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut leading = 0.0f64;
        for m in 0..SERIES_TERMS {
            let k = (2 * m as u64 + 1) * k0;
            let ln_bound = k as f64 * (0.5 * x).ln() - series.ln_factorials[m];
            if m > 0 && (ln_bound < -745.0 || ln_bound.exp() < 1e-18 * leading) {
                break;
            }
            let j = if x > 0.0 {
                bessel_j_core(k as u32, x, series.ln_factorials[m])
            } else {
                0.0
            };
            if m == 0 {
                leading = j.abs();
            }
            acc += minus_i_pow(k) * j;
        }
        let (s, c) = x.sin_cos();
        Complex64::new(c, s) * acc * (4.0 * k0 as f64)
    }

    pub(crate) fn y_abs_sq(&self, z: f64) -> (f64, FilterSource) {
        if self.prefers_series(z) {
            (self.y_series(z).norm_sqr(), FilterSource::BesselSeries)
        } else {
            (self.y_direct(z).norm_sqr(), FilterSource::Direct)
        }
    }

    pub(crate) fn value(&self, z: f64) -> FilterValue {
        let (y, source) = if self.prefers_series(z) {
            (self.y_series(z), FilterSource::BesselSeries)
        } else {
            (self.y_direct(z), FilterSource::Direct)
        };
        FilterValue {
            z,
            x: self.x(z),
            y,
            y_abs_sq: y.norm_sqr(),
            source,
        }
    }
}

fn minus_i_pow(k: u64) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Phase factor `x_n(z)`.
pub fn x_factor(seq: &PulseSequence, z: f64) -> f64 {
    FilterKernel::new(seq).x(z)
}

/// Coherence factor `y_n(z)` by compensated direct summation.
pub fn y_factor(seq: &PulseSequence, z: f64) -> Complex64 {
    FilterKernel::new(seq).y_direct(z)
}

/// `|y_n(z)|^2`, switching to the Bessel representation for optimized sequences
/// where the direct sum would lose relative accuracy.
pub fn y_abs_sq(seq: &PulseSequence, z: f64) -> f64 {
    FilterKernel::new(seq).y_abs_sq(z).0
}

/// All filter quantities at `z`, tagged with the route used for `y`.
pub fn filter_value(seq: &PulseSequence, z: f64) -> FilterValue {
    FilterKernel::new(seq).value(z)
}

/// Closed form of `|y_n(z)|^2` for `n >= 1` equidistant pulses:
/// `4 tan^2(z/(2n+2)) cos^2(z/2)` for even `n`, with `sin^2(z/2)` for odd `n`.
pub fn equidistant_closed_form(n: usize, z: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(
            "the equidistant closed form needs n >= 1".into(),
        ));
    }
    let (s, c) = (z / (2 * n + 2) as f64).sin_cos();
    if c.abs() < 1e-12 {
        return Err(Error::Pole { n, z });
    }
    let tan = s / c;
    let (hs, hc) = (0.5 * z).sin_cos();
    let parity = if n.is_multiple_of(2) { hc } else { hs };
    Ok(4.0 * tan * tan * parity * parity)
}

/// Leading Bessel form `16 (n+1)^2 J_{n+1}(z/2)^2` of the optimized filter.
pub fn bessel_approx(n: usize, z: f64) -> f64 {
    let k = (n + 1) as f64;
    let j = bessel_j((n + 1) as u32, 0.5 * z);
    16.0 * k * k * j * j
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Naive evaluation of the defining sum, no cancellation handling.
    fn y_naive(seq: &PulseSequence, z: f64) -> Complex64 {
        let n = seq.n();
        let mut y = Complex64::new(1.0, 0.0);
        let end = if n.is_multiple_of(2) { -1.0 } else { 1.0 };
        y += end * Complex64::new(0.0, z).exp();
        for (i, &d) in seq.deltas().iter().enumerate() {
            let s = if (i + 1) % 2 == 0 { 2.0 } else { -2.0 };
            y += s * Complex64::new(0.0, z * d).exp();
        }
        y
    }

    #[test]
    fn x_factor_examples() {
        assert_relative_eq!(x_factor(&PulseSequence::equidistant(0), PI / 2.0), 1.0);
        assert_relative_eq!(
            x_factor(&PulseSequence::udd(1), PI),
            1.0,
            max_relative = 1e-15
        );
        for seq in [PulseSequence::udd(7), PulseSequence::equidistant(4)] {
            assert_eq!(x_factor(&seq, 0.0), 0.0);
        }
    }

    #[test]
    fn y_factor_examples() {
        let y = y_factor(&PulseSequence::equidistant(0), PI);
        assert_relative_eq!(y.re, 2.0, max_relative = 1e-15);
        assert!(y.im.abs() < 1e-15);

        // (1 - e^{i/2})^2, |y|^2 = 16 sin^4(1/4)
        let y = y_factor(&PulseSequence::udd(1), 1.0);
        let want = (Complex64::new(1.0, 0.0) - Complex64::new(0.0, 0.5).exp()).powi(2);
        assert_relative_eq!(y.re, want.re, max_relative = 1e-14);
        assert_relative_eq!(y.im, want.im, max_relative = 1e-14);
        assert_relative_eq!(y.norm_sqr(), 0.059_944_116_613_297_7, max_relative = 1e-14);

        assert_eq!(
            y_factor(&PulseSequence::udd(5), 0.0),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn y_abs_sq_examples() {
        // 4 tan^2(1/6) cos^2(1/2)
        assert_relative_eq!(
            y_abs_sq(&PulseSequence::equidistant(2), 1.0),
            0.087_182_333_443_501_94,
            max_relative = 1e-14
        );
        for seq in [PulseSequence::udd(3), PulseSequence::equidistant(9)] {
            assert_eq!(y_abs_sq(&seq, 0.0), 0.0);
        }
        assert_relative_eq!(
            y_abs_sq(&PulseSequence::udd(1), 2.0 * PI),
            16.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn closed_form_examples() {
        assert_relative_eq!(
            equidistant_closed_form(1, 1.0).unwrap(),
            0.059_944_116_613_297_7,
            max_relative = 1e-14
        );
        assert_eq!(equidistant_closed_form(2, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            equidistant_closed_form(2, 1.0).unwrap(),
            0.087_182_333_443_501_94,
            max_relative = 1e-14
        );
        assert!(matches!(
            equidistant_closed_form(2, 3.0 * PI),
            Err(Error::Pole { n: 2, .. })
        ));
        assert!(equidistant_closed_form(0, 1.0).is_err());
    }

    #[test]
    fn bessel_approx_examples() {
        // 64 J_2(0.5)^2
        assert_relative_eq!(
            bessel_approx(1, 1.0),
            0.059_942_800_119_014_23,
            max_relative = 1e-13
        );
        let z = 1e-6;
        assert_relative_eq!(bessel_approx(0, z), z * z, max_relative = 1e-12);
        assert_eq!(bessel_approx(3, 0.0), 0.0);
    }

    #[test]
    fn series_matches_direct_where_both_resolve() {
        // values from a 40-digit evaluation of the defining sum
        let cases = [
            (3usize, 5.0, 1.393_605_068_163_824_7),
            (5, 3.0, 2.994_611_861_414_053_9e-5),
            (20, 15.0, 9.505_499_899_064_066e-13),
        ];
        for (n, z, want) in cases {
            let k = FilterKernel::new(&PulseSequence::udd(n));
            assert_relative_eq!(k.y_series(z).norm_sqr(), want, max_relative = 1e-12);
            let direct = k.y_direct(z);
            let series = k.y_series(z);
            assert!((direct - series).norm() < 1e-13, "n={n} z={z}");
        }
    }

    #[test]
    fn series_route_used_only_when_needed() {
        let k = FilterKernel::new(&PulseSequence::udd(20));
        assert_eq!(k.y_abs_sq(1e-3).1, FilterSource::BesselSeries);
        assert_eq!(k.y_abs_sq(60.0).1, FilterSource::Direct);
        let k = FilterKernel::new(&PulseSequence::equidistant(20));
        assert_eq!(k.y_abs_sq(1e-3).1, FilterSource::Direct);
        let v = filter_value(&PulseSequence::udd(20), 0.1);
        assert_eq!(v.source, FilterSource::BesselSeries);
        assert_eq!(v.y_abs_sq, v.y.norm_sqr());
    }

    #[test]
    fn bessel_ratio_near_one_at_small_z() {
        for n in 1..=20 {
            let seq = PulseSequence::udd(n);
            let ratio = y_abs_sq(&seq, 0.1) / bessel_approx(n, 0.1);
            assert!((ratio - 1.0).abs() <= 1e-6, "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn log_slope_reflects_vanishing_derivatives() {
        for n in [1usize, 2, 3, 8, 15, 20] {
            let seq = PulseSequence::udd(n);
            let slope = log_log_slope(|z| y_abs_sq(&seq, z), 0.01, 0.1, 41);
            let want = (2 * n + 2) as f64;
            assert!((slope - want).abs() < 0.01, "n={n} slope={slope}");
        }
        // equidistant stays quadratic
        let seq = PulseSequence::equidistant(10);
        let slope = log_log_slope(|z| y_abs_sq(&seq, z), 0.01, 0.1, 41);
        assert!((slope - 2.0).abs() < 0.01, "slope={slope}");
    }

    fn log_log_slope(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..points {
            let lz = lo.ln() + (hi / lo).ln() * i as f64 / (points - 1) as f64;
            let ly = f(lz.exp()).ln();
            sx += lz;
            sy += ly;
            sxx += lz * lz;
            sxy += lz * ly;
        }
        let m = points as f64;
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    }

    #[test]
    fn cpmg_identity() {
        for z in [0.3, 1.7, 4.2, 9.9] {
            let a = y_abs_sq(&PulseSequence::udd(2), z);
            let b = y_abs_sq(&PulseSequence::equidistant(2), z);
            assert!((a - b).abs() > 1e-6 * a.max(b), "z={z}");
            assert_eq!(
                y_abs_sq(&PulseSequence::udd(1), z),
                y_abs_sq(&PulseSequence::equidistant(1), z)
            );
        }
    }

    #[test]
    fn small_z_constants() {
        let eq = FilterKernel::new(&PulseSequence::equidistant(4));
        let z = 1e-5;
        assert_relative_eq!(
            eq.y_abs_sq(z).0,
            (z * eq.first_moment()).powi(2),
            max_relative = 1e-8
        );
        assert_relative_eq!(eq.x(z), z * eq.x_slope(), max_relative = 1e-8);
        let udd = FilterKernel::new(&PulseSequence::udd(4));
        assert!(udd.first_moment().abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn equidistant_matches_closed_form(n in 1usize..=50, z in 0.0f64..20.0) {
            let c = (z / (2 * n + 2) as f64).cos();
            prop_assume!(c.abs() > 1e-6);
            let direct = y_abs_sq(&PulseSequence::equidistant(n), z);
            let closed = equidistant_closed_form(n, z).unwrap();
            prop_assert!((direct - closed).abs() <= 1e-12 * closed.max(1.0),
                "n={} z={} direct={} closed={}", n, z, direct, closed);
        }

        #[test]
        fn reflection_preserves_modulus(raw in proptest::collection::vec(0.001f64..0.999, 0..12), z in 0.0f64..30.0) {
            let mut d = raw;
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d.dedup();
            let reflected: Vec<f64> = d.iter().rev().map(|x| 1.0 - x).collect();
            let a = PulseSequence::custom(d).unwrap();
            let b = PulseSequence::custom(reflected).unwrap();
            let (ya, yb) = (y_abs_sq(&a, z), y_abs_sq(&b, z));
            prop_assert!((ya - yb).abs() <= 1e-12 * ya.max(1.0));
        }

        #[test]
        fn direct_sum_agrees_with_naive_at_moderate_z(n in 0usize..30, z in 0.5f64..50.0) {
            for seq in [PulseSequence::udd(n), PulseSequence::equidistant(n)] {
                let a = y_factor(&seq, z);
                let b = y_naive(&seq, z);
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn y_abs_sq_nonnegative(n in 0usize..60, z in 0.0f64..1e3) {
            prop_assert!(y_abs_sq(&PulseSequence::udd(n), z) >= 0.0);
        }
    }
}
