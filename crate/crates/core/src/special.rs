//! Special functions and summation helpers used by the filter kernels.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `ln(n!)`, exact summation of logarithms up to 256 and Stirling's series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 256 {
        return (2..=n)
            .map(|k| (k as f64).ln())
            .collect::<CompensatedSum>()
            .value();
    }
    let x = n as f64 + 1.0;
    // ln Gamma(x) asymptotic series
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Bessel function of the first kind `J_order(x)` for `x >= 0` by the ascending series.
///
/// The leading factor `(x/2)^order / order!` is formed in log space so high orders at small
/// arguments neither overflow nor lose the exponent. Summation stops once the term ratio
/// drops the next term below `1e-16` of the running sum. Negative `x` uses the parity rule.
///
/// Accuracy degrades by cancellation once `x` greatly exceeds `order`; callers stay in the
/// regime `x/2 <~ order` or accept that loss.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(order, -x);
        return if order % 2 == 1 { -v } else { v };
    }
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    bessel_j_core(order, x, ln_factorial(order as u64))
}

/// Ascending series for `x > 0` given `ln(order!)`.
pub(crate) fn bessel_j_core(order: u32, x: f64, ln_fact: f64) -> f64 {
    let nu = order as f64;
    let half = 0.5 * x;
    let ln_lead = nu * half.ln() - ln_fact;
    if ln_lead < -745.0 {
        return 0.0;
    }
    ln_lead.exp() * ascending_tail(nu, half * half)
}

/// `sum_k (-q)^k / (k! (nu+1)_k)`, the series factor after `(x/2)^nu / nu!`.
fn ascending_tail(nu: f64, q: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut term = 1.0;
    acc.add(term);
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (nu + k));
        acc.add(term);
        if term.abs() <= 1e-16 * acc.value().abs() || term == 0.0 {
            break;
        }
        if k > 10_000.0 {
            break;
        }
    }
    acc.value()
}
