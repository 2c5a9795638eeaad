//! Globally adaptive Gauss-Kronrod quadrature over a pre-panelled interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::CompensatedSum;

/// Nested rule applied on every panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PanelRule {
    /// 15-point Kronrod extension of the 7-point Gauss rule.
    #[default]
    GaussKronrod15,
    /// 21-point Kronrod extension of the 10-point Gauss rule.
    GaussKronrod21,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub max_panels: usize,
    pub panel_rule: PanelRule,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_panels: 1 << 20,
            panel_rule: PanelRule::GaussKronrod15,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, max_panels: usize) -> Result<Self> {
        let spec = Self {
            rel_tol,
            max_panels,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_rule(mut self, rule: PanelRule) -> Self {
        self.panel_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-2) {
            return Err(Error::Domain(format!(
                "rel_tol must lie in (0, 1e-2), got {}",
                self.rel_tol
            )));
        }
        if self.max_panels < 16 {
            return Err(Error::Domain(format!(
                "max_panels must be >= 16, got {}",
                self.max_panels
            )));
        }
        Ok(())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
    pub evaluations: usize,
}

impl Integral {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            abs_error: 0.0,
            panels: 0,
            evaluations: 0,
        }
    }
}

// QUADPACK abscissae and weights; the last entry is the centre.
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights on the odd Kronrod nodes (1, 3, 5) and the centre.
const WG7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const XGK21: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
// Gauss weights on the odd Kronrod nodes (1, 3, 5, 7, 9); the 10-point rule has no centre.
const WG10: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by position so the refinement order is reproducible
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// QUADPACK's error rescaling of `|K - G|`.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn apply_rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: PanelRule) -> Panel {
    let (xgk, wgk, wg): (&[f64], &[f64], &[f64]) = match rule {
        PanelRule::GaussKronrod15 => (&XGK15, &WGK15, &WG7),
        PanelRule::GaussKronrod21 => (&XGK21, &WGK21, &WG10),
    };
    let n = xgk.len();
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_centre = f(centre);
    let gauss_has_centre = wg.len() * 2 == n;

    let mut res_k = f_centre * wgk[n - 1];
    let mut res_g = if gauss_has_centre {
        f_centre * wg[wg.len() - 1]
    } else {
        0.0
    };
    let mut res_abs = res_k.abs();
    let mut fv = [(0.0f64, 0.0f64); 10];
    for j in 0..n - 1 {
        let dx = half * xgk[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv[j] = (f1, f2);
        res_k += wgk[j] * (f1 + f2);
        res_abs += wgk[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += wg[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = wgk[n - 1] * (f_centre - mean).abs();
    for j in 0..n - 1 {
        res_asc += wgk[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let scale = half.abs();
    let error = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    Panel {
        a,
        b,
        value: res_k * half,
        error,
        abs_value: res_abs * scale,
    }
}

fn evaluations_per_panel(rule: PanelRule) -> usize {
    match rule {
        PanelRule::GaussKronrod15 => 15,
        PanelRule::GaussKronrod21 => 21,
    }
}

/// Integrates `f` over `[edges[0], edges[last]]`, starting from the panels delimited
/// by `edges` and bisecting the panel with the largest error estimate until
/// the total estimate drops below `rel_tol * |I|` (or the roundoff floor
/// `100 eps * integral(|f|)`).
pub fn integrate<F>(f: F, edges: &[f64], spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if edges.len() < 2 {
        return Err(Error::Domain("integration needs at least two edges".into()));
    }
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "panel edges must be strictly increasing".into(),
        ));
    }
    let rule = spec.panel_rule;
    let per_panel = evaluations_per_panel(rule);
    let initial = edges.len() - 1;
    if initial > spec.max_panels {
        return Err(Error::Domain(format!(
            "{initial} initial panels exceed max_panels = {}",
            spec.max_panels
        )));
    }

    let mut heap = BinaryHeap::with_capacity(initial * 2);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut total_abs = 0.0;
    for w in edges.windows(2) {
        let p = apply_rule(&f, w[0], w[1], rule);
        total += p.value;
        total_err += p.error;
        total_abs += p.abs_value;
        heap.push(p);
    }
    let mut evaluations = initial * per_panel;
    let mut panels = initial;
    let mut frozen: Vec<Panel> = Vec::new();

    let tolerance = |value: f64, abs_value: f64| {
        (spec.rel_tol * value.abs()).max(100.0 * f64::EPSILON * abs_value)
    };

    while total_err > tolerance(total, total_abs) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b)
            || (worst.b - worst.a) < 4.0 * f64::EPSILON * worst.b.abs()
        {
            // cannot be resolved further in floating point
            frozen.push(worst);
            continue;
        }
        if panels >= spec.max_panels {
            heap.push(worst);
            let (value, err) = resum(heap.iter().chain(frozen.iter()));
            return Err(Error::Quadrature {
                estimate: value,
                error_bound: err,
                panels,
            });
        }
        let left = apply_rule(&f, worst.a, mid, rule);
        let right = apply_rule(&f, mid, worst.b, rule);
        evaluations += 2 * per_panel;
        panels += 1;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_abs += left.abs_value + right.abs_value - worst.abs_value;
        heap.push(left);
        heap.push(right);

        // the running totals drift; refresh them now and then
        if panels.is_multiple_of(4096) {
            let (v, e) = resum(heap.iter().chain(frozen.iter()));
            total = v;
            total_err = e;
            total_abs = heap.iter().chain(frozen.iter()).map(|p| p.abs_value).sum();
        }
    }

    let (value, abs_error) = resum(heap.iter().chain(frozen.iter()));
    let frozen_abs: f64 = frozen.iter().map(|p| p.abs_value).sum::<f64>();
    if abs_error > tolerance(value, total_abs.max(frozen_abs)) && !frozen.is_empty() {
        return Err(Error::Quadrature {
            estimate: value,
            error_bound: abs_error,
            panels,
        });
    }
    Ok(Integral {
        value,
        abs_error,
        panels,
        evaluations,
    })
}

/// Sums panel values in position order so the result does not depend on heap layout.
fn resum<'a>(panels: impl Iterator<Item = &'a Panel>) -> (f64, f64) {
    let mut all: Vec<&Panel> = panels.collect();
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = all
        .iter()
        .map(|p| p.value)
        .collect::<CompensatedSum>()
        .value();
    let err = all.iter().map(|p| p.error).sum();
    (value, err)
}

/// `count` equal panels over `[a, b]` merged with extra interior breakpoints.
pub fn panel_edges(a: f64, b: f64, count: usize, breakpoints: &[f64]) -> Vec<f64> {
    let count = count.max(1);
    let width = (b - a) / count as f64;
    let mut edges: Vec<f64> = (0..=count).map(|i| a + width * i as f64).collect();
    edges[count] = b;
    edges.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|x, y| (*x - *y).abs() <= 8.0 * f64::EPSILON * b.abs().max(1.0));
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn polynomial_is_exact_on_one_panel() {
        for rule in [PanelRule::GaussKronrod15, PanelRule::GaussKronrod21] {
            let r = integrate(
                |x| x.powi(7) - 3.0 * x * x,
                &[0.0, 2.0],
                &spec().with_rule(rule),
            )
            .unwrap();
            assert_relative_eq!(r.value, 32.0 - 8.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn oscillatory_integrand() {
        // int_0^1 sin(200 x)^2 / x^0 dx
        let edges = panel_edges(0.0, 1.0, 64, &[]);
        let r = integrate(|x| (200.0 * x).sin().powi(2), &edges, &spec()).unwrap();
        let exact = 0.5 - (400.0f64).sin() / 800.0;
        assert_relative_eq!(r.value, exact, max_relative = 1e-12);
    }

    #[test]
    fn endpoint_singularity_adapts() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], &spec()).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-9);
        assert!(r.panels > 1);
    }

    #[test]
    fn zero_integrand_terminates_immediately() {
        let r = integrate(|_| 0.0, &panel_edges(0.0, 1.0, 16, &[]), &spec()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.panels, 16);
    }

    #[test]
    fn non_convergence_reports_best_estimate() {
        let tight = QuadratureSpec::new(1e-12, 16).unwrap();
        let err = integrate(
            |x| (1.0 / x).sin(),
            &panel_edges(1e-4, 1.0, 16, &[]),
            &tight,
        )
        .unwrap_err();
        match err {
            Error::Quadrature {
                estimate,
                error_bound,
                panels,
            } => {
                assert!(estimate.is_finite() && error_bound > 0.0);
                assert_eq!(panels, 16);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 100).is_err());
        assert!(QuadratureSpec::new(0.1, 100).is_err());
        assert!(QuadratureSpec::new(1e-8, 8).is_err());
        assert!(QuadratureSpec::new(1e-8, 16).is_ok());
    }

    #[test]
    fn edges_merge_breakpoints() {
        let e = panel_edges(0.0, 1.0, 4, &[0.3, 0.5, 2.0, -1.0]);
        assert_eq!(e, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn sign_changing_integrand_uses_roundoff_floor() {
        // integral vanishes exactly; relative tolerance alone could never be met
        let edges = panel_edges(0.0, 2.0 * PI, 16, &[]);
        let r = integrate(|x| x.sin(), &edges, &spec()).unwrap();
        assert!(r.value.abs() < 1e-13);
    }
}
