use ddlab_core::{
    compare_schemes, min_pulses, signal, storage_time, Bath, CompareSpec, OhmicBath, PulseSequence,
    QuadratureSpec, Scheme,
};

const ALPHAS: [f64; 4] = [0.25, 0.1, 0.01, 0.001];
const COUNTS: [usize; 8] = [0, 1, 2, 5, 10, 20, 50, 100];

fn store(scheme: Scheme, n: usize, alpha: f64) -> f64 {
    let bath: Bath = OhmicBath::zero_temperature(alpha).unwrap().into();
    let seq = PulseSequence::generate(scheme, n).unwrap();
    storage_time(&seq, &bath, 1e-4, &QuadratureSpec::default())
        .unwrap()
        .t_store
}

fn table(scheme: Scheme, alpha: f64) -> Vec<f64> {
    COUNTS.iter().map(|&n| store(scheme, n, alpha)).collect()
}

fn assert_nondecreasing(label: &str, counts: &[usize], times: &[f64]) {
    for (w, n) in times.windows(2).zip(counts.windows(2)) {
        assert!(
            w[1] >= w[0],
            "{label}: n={} gives {} < {} at n={}",
            n[1],
            w[1],
            w[0],
            n[0]
        );
    }
}

#[test]
fn udd_storage_grows_with_pulse_count() {
    for alpha in ALPHAS {
        let times = table(Scheme::Udd, alpha);
        assert_nondecreasing(&format!("udd alpha={alpha}"), &COUNTS, &times);
    }
}

/// Even equidistant counts leave one extra toggling interval, so static noise
/// survives; storage time is monotone only within each parity class.
#[test]
fn equidistant_storage_grows_within_parity() {
    for alpha in ALPHAS {
        let times = table(Scheme::Equidistant, alpha);
        for parity in [0, 1] {
            let (counts, times): (Vec<usize>, Vec<f64>) = COUNTS
                .iter()
                .zip(&times)
                .filter(|(n, _)| *n % 2 == parity || **n == 0)
                .map(|(n, t)| (*n, *t))
                .unzip();
            assert_nondecreasing(&format!("equidistant alpha={alpha}"), &counts, &times);
        }
    }
    assert!(store(Scheme::Equidistant, 2, 0.25) < store(Scheme::Equidistant, 1, 0.25));
}

#[test]
fn equidistant_search_reports_parity_violation() {
    let bath: Bath = OhmicBath::zero_temperature(0.25).unwrap().into();
    let r = min_pulses(
        Scheme::Equidistant,
        &bath,
        1e-4,
        5.0,
        &QuadratureSpec::default(),
    )
    .unwrap();
    assert!(r.monotonicity_violation);
    assert!(r.storage_time >= 5.0);
    for n in 0..r.n {
        assert!(store(Scheme::Equidistant, n, 0.25) < 5.0, "n={n}");
    }
}

#[test]
fn udd_dominates_from_two_pulses() {
    for alpha in ALPHAS {
        for &n in COUNTS.iter().filter(|&&n| n >= 2) {
            let eq = store(Scheme::Equidistant, n, alpha);
            let udd = store(Scheme::Udd, n, alpha);
            assert!(
                udd >= eq,
                "alpha={alpha} n={n}: udd {udd} < equidistant {eq}"
            );
        }
    }
}

#[test]
fn equidistant_storage_scales_with_pulse_count() {
    for alpha in ALPHAS {
        let per_interval: Vec<f64> = [10usize, 20, 50, 100]
            .iter()
            .map(|&n| store(Scheme::Equidistant, n, alpha) / (n + 1) as f64)
            .collect();
        let max = per_interval.iter().cloned().fold(f64::MIN, f64::max);
        let min = per_interval.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 3.0, "alpha={alpha}: {per_interval:?}");
    }
}

#[test]
fn sweep_rows_match_direct_evaluation() {
    let quad = QuadratureSpec::default();
    let spec = CompareSpec::new(
        5,
        vec![0.25, 0.01],
        vec![0.0, 0.1],
        vec![0.0, 0.3, 1.0, 4.0, 12.0],
    );
    let sweep = compare_schemes(&spec, &quad).unwrap();
    for row in &sweep.rows {
        let bath: Bath = OhmicBath::new(row.alpha, 1.0, row.temperature)
            .unwrap()
            .into();
        let seq = PulseSequence::generate(row.scheme, row.n).unwrap();
        let p = signal(&seq, &bath, row.t, &quad).unwrap();
        assert!((p.signal - row.s).abs() <= 1e-10);
        assert!((p.one_minus_s - row.one_minus_s).abs() <= 1e-10);
    }
}
