//! Pulse-instant sequences.
//!
//! Instants are normalized to the total evolution time, so a sequence applied
//! over `[0, t]` fires its `j`-th pulse at `deltas[j] * t`.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Equidistant,
    Udd,
    Custom,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Equidistant => "equidistant",
            Scheme::Udd => "udd",
            Scheme::Custom => "custom",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" | "eq" => Ok(Scheme::Equidistant),
            "udd" | "optimized" => Ok(Scheme::Udd),
            "custom" => Ok(Scheme::Custom),
            other => Err(Error::Domain(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Strictly increasing pulse instants in `(0, 1)`. An empty sequence is free evolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSequence {
    deltas: Vec<f64>,
    scheme: Scheme,
}

impl PulseSequence {
    /// `delta_m = m / (n + 1)`.
    pub fn equidistant(n: usize) -> Self {
        let denom = (n + 1) as f64;
        Self {
            deltas: (1..=n).map(|m| m as f64 / denom).collect(),
            scheme: Scheme::Equidistant,
        }
    }

    /// Optimized instants `delta_j = sin^2(pi j / (2n + 2))`, correctly rounded.
    ///
    /// The lower half is evaluated in double-double arithmetic; the upper half is
    /// its reflection `1 - delta_{n+1-j}` taken in the same precision.
    pub fn udd(n: usize) -> Self {
        let denom = (2 * n + 2) as f64;
        let mut deltas = vec![0.0; n];
        for j in 1..=n {
            let mirror = n + 1 - j;
            deltas[j - 1] = if j <= mirror {
                dd::sin_pi_squared(j as f64, denom).to_f64()
            } else {
                dd::sin_pi_squared(mirror as f64, denom)
                    .one_minus()
                    .to_f64()
            };
        }
        Self {
            deltas,
            scheme: Scheme::Udd,
        }
    }

    /// Validates user instants without reordering them.
    pub fn custom(deltas: Vec<f64>) -> Result<Self> {
        for (i, &d) in deltas.iter().enumerate() {
            if !d.is_finite() || d <= 0.0 || d >= 1.0 {
                return Err(Error::InvalidSequence {
                    index: i,
                    reason: format!("{d} is outside the open interval (0, 1)"),
                });
            }
            if i > 0 && d <= deltas[i - 1] {
                let reason = if d == deltas[i - 1] {
                    format!("duplicate instant {d}")
                } else {
                    format!("{d} does not exceed the previous instant {}", deltas[i - 1])
                };
                return Err(Error::InvalidSequence { index: i, reason });
            }
        }
        Ok(Self {
            deltas,
            scheme: Scheme::Custom,
        })
    }

    /// Builds a generated sequence for `scheme`; `Custom` is rejected here.
    pub fn generate(scheme: Scheme, n: usize) -> Result<Self> {
        match scheme {
            Scheme::Equidistant => Ok(Self::equidistant(n)),
            Scheme::Udd => Ok(Self::udd(n)),
            Scheme::Custom => Err(Error::Domain(
                "custom sequences need explicit instants".into(),
            )),
        }
    }

    /// Reads a one-column CSV with header `delta`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 1 || &headers[0] != "delta" {
            return Err(Error::Table(format!(
                "expected header \"delta\", found {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut deltas = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let d = record[0]
                .parse::<f64>()
                .map_err(|e| Error::Table(format!("row {i}: {e}")))?;
            deltas.push(d);
        }
        Self::custom(deltas)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Number of pulses.
    pub fn n(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_free_evolution(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Pulse times for an evolution of total duration `t`.
    pub fn pulse_times(&self, t: f64) -> impl Iterator<Item = f64> + '_ {
        self.deltas.iter().map(move |d| d * t)
    }
}

/// Just enough double-double arithmetic to round `sin^2(pi p / q)` correctly.
mod dd {
    #[derive(Debug, Clone, Copy)]
    pub(super) struct Dd {
        hi: f64,
        lo: f64,
    }

    const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    impl Dd {
        fn from_f64(x: f64) -> Self {
            Dd { hi: x, lo: 0.0 }
        }

        fn add(self, o: Dd) -> Dd {
            let s = two_sum(self.hi, o.hi);
            let t = two_sum(self.lo, o.lo);
            let s = quick_two_sum(s.hi, s.lo + t.hi);
            quick_two_sum(s.hi, s.lo + t.lo)
        }

        fn neg(self) -> Dd {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        }

        fn mul(self, o: Dd) -> Dd {
            let p = two_prod(self.hi, o.hi);
            let lo = p.lo + (self.hi * o.lo + self.lo * o.hi);
            quick_two_sum(p.hi, lo)
        }

        fn div_f64(self, d: f64) -> Dd {
            let q1 = self.hi / d;
            let r = self.add(two_prod(q1, d).neg());
            let q2 = r.hi / d;
            let r = r.add(two_prod(q2, d).neg());
            let q3 = r.hi / d;
            quick_two_sum(q1, q2).add(Dd::from_f64(q3))
        }

        pub(super) fn one_minus(self) -> Dd {
            Dd::from_f64(1.0).add(self.neg())
        }

        pub(super) fn to_f64(self) -> f64 {
            self.hi + self.lo
        }
    }

    /// `sin^2(pi p / q)` for `0 <= p / q <= 1/4`.
    pub(super) fn sin_pi_squared(p: f64, q: f64) -> Dd {
        let x = PI.mul(Dd::from_f64(p)).div_f64(q);
        let x2 = x.mul(x);
        // Taylor series of sin; |x| <= pi/4 so 16 terms exhaust double-double precision
        let mut term = x;
        let mut sum = x;
        for k in 1..16 {
            let k = k as f64;
            term = term.mul(x2).neg().div_f64((2.0 * k) * (2.0 * k + 1.0));
            sum = sum.add(term);
        }
        sum.mul(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equidistant_examples() {
        assert!(PulseSequence::equidistant(0).deltas().is_empty());
        assert_eq!(PulseSequence::equidistant(3).deltas(), &[0.25, 0.5, 0.75]);
        assert_eq!(PulseSequence::equidistant(1).deltas(), &[0.5]);
    }

    #[test]
    fn udd_examples() {
        assert_eq!(PulseSequence::udd(2).deltas(), &[0.25, 0.75]);
        assert_eq!(PulseSequence::udd(1).deltas(), &[0.5]);
        // sin^2(pi/12) and sin^2(5 pi/12), correctly rounded
        assert_eq!(
            PulseSequence::udd(5).deltas(),
            &[
                0.066_987_298_107_780_68,
                0.25,
                0.5,
                0.75,
                0.933_012_701_892_219_3
            ]
        );
        let d3 = PulseSequence::udd(3);
        let want = [0.146_446_609_406_726_24, 0.5, 0.853_553_390_593_273_8];
        for (a, b) in d3.deltas().iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn custom_accepts_and_rejects() {
        let s = PulseSequence::custom(vec![0.1, 0.9]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.scheme(), Scheme::Custom);

        let dup = PulseSequence::custom(vec![0.5, 0.5]).unwrap_err();
        assert!(matches!(dup, Error::InvalidSequence { index: 1, .. }));
        let edge = PulseSequence::custom(vec![0.0, 0.5]).unwrap_err();
        assert!(matches!(edge, Error::InvalidSequence { index: 0, .. }));
        let desc = PulseSequence::custom(vec![0.2, 0.6, 0.4]).unwrap_err();
        assert!(matches!(desc, Error::InvalidSequence { index: 2, .. }));
        assert!(PulseSequence::custom(vec![0.5, 1.0]).is_err());
        assert!(PulseSequence::custom(vec![f64::NAN]).is_err());
        assert!(PulseSequence::custom(vec![]).unwrap().is_free_evolution());
    }

    #[test]
    fn custom_csv() {
        let s = PulseSequence::from_csv_reader("delta\n0.2\n0.7\n".as_bytes()).unwrap();
        assert_eq!(s.deltas(), &[0.2, 0.7]);
        assert!(PulseSequence::from_csv_reader("d\n0.2\n".as_bytes()).is_err());
        assert!(PulseSequence::from_csv_reader("delta\n0.7\n0.2\n".as_bytes()).is_err());
    }

    #[test]
    fn schemes_coincide_only_below_two() {
        for n in 0..=1 {
            assert_eq!(
                PulseSequence::udd(n).deltas(),
                PulseSequence::equidistant(n).deltas()
            );
        }
        for n in 2..40 {
            assert_ne!(
                PulseSequence::udd(n).deltas(),
                PulseSequence::equidistant(n).deltas()
            );
        }
    }

    #[test]
    fn large_sequences_are_valid() {
        for n in [1000, 10_000] {
            for seq in [PulseSequence::udd(n), PulseSequence::equidistant(n)] {
                PulseSequence::custom(seq.deltas().to_vec()).unwrap();
            }
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("udd".parse::<Scheme>().unwrap(), Scheme::Udd);
        assert_eq!(
            "equidistant".parse::<Scheme>().unwrap(),
            Scheme::Equidistant
        );
        assert!("cpmg".parse::<Scheme>().is_err());
    }

    proptest! {
        #[test]
        fn generated_sequences_are_symmetric(n in 0usize..400) {
            for seq in [PulseSequence::udd(n), PulseSequence::equidistant(n)] {
                let d = seq.deltas();
                for j in 0..n {
                    let sum = d[j] + d[n - 1 - j];
                    prop_assert!((sum - 1.0).abs() <= f64::EPSILON, "n={} j={} sum={}", n, j, sum);
                }
            }
        }

        #[test]
        fn generated_sequences_validate(n in 0usize..2000) {
            prop_assert!(PulseSequence::custom(PulseSequence::udd(n).deltas().to_vec()).is_ok());
            prop_assert!(PulseSequence::custom(PulseSequence::equidistant(n).deltas().to_vec()).is_ok());
        }
    }
}
