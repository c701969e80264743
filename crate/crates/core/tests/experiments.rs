use pointer_anneal::experiments::{fit_thresholds, min_n, time_series, ThresholdQuery};
use pointer_anneal::{engine, EngineKind, Quantity, SimParams};

#[test]
fn success_threshold_at_quarter() {
    let base = SimParams::new(0.5, 1).unwrap();
    let r = min_n(&ThresholdQuery::new(0.25, 0.9, Quantity::SuccessP1), &base).unwrap();
    let n = r.n_min.unwrap();
    assert!((128..=512).contains(&n), "n_min = {n}");
    assert!(r.value_at_n_min.unwrap() >= 0.9);
    let (below_n, below_v) = r.below.unwrap();
    assert_eq!(below_n, n / 2);
    assert!(below_v < 0.9);
}

#[test]
fn large_n_reaches_target() {
    let p = SimParams::new(0.5, 4096).unwrap();
    let rows = time_series(&p, 64, EngineKind::Collision).unwrap();
    assert_eq!(rows.len(), 65);
    assert!(rows.last().unwrap().p1 >= 0.9);
}

#[test]
fn collapse_at_fixed_lambda() {
    for lambda in [16usize, 64] {
        let finals: Vec<f64> = [
            (0.25, 16 * lambda),
            (0.125, 64 * lambda),
            (0.0625, 256 * lambda),
        ]
        .iter()
        .map(|&(eps, n)| {
            let p = SimParams::new(eps, n).unwrap();
            engine::run(&p, n).unwrap().final_p1
        })
        .collect();
        for w in finals.windows(2) {
            assert!((w[0] - w[1]).abs() <= 0.02, "lambda={lambda} {finals:?}");
        }
    }
}

#[test]
fn thresholds_collapse_around_fit() {
    let base = SimParams::new(0.5, 1).unwrap();
    let results: Vec<_> = (1..=4)
        .map(|k| {
            let q = ThresholdQuery::new(0.5f64.powi(k), 0.9, Quantity::SuccessP1);
            min_n(&q, &base).unwrap()
        })
        .collect();
    let fit = fit_thresholds(&results).unwrap();
    for r in &results {
        let l = r.lambda().unwrap();
        assert!(l >= fit.lambda_hat / 2.0 && l <= 2.0 * fit.lambda_hat);
    }
}

#[test]
fn reruns_are_bit_identical() {
    let p = SimParams::new(0.3, 777).unwrap();
    let a = engine::run(&p, 10).unwrap();
    let b = engine::run(&p, 10).unwrap();
    assert_eq!(a.final_p1.to_bits(), b.final_p1.to_bits());
    assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
    assert_eq!(a.pointer_samples, b.pointer_samples);
}
