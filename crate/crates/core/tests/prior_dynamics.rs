mod common;

use ltgcd::ClassPrior;

#[test]
fn frozen_perfect_classifier_recovers_true_frequencies() {
    let err = common::frozen_prior_error(1000, 0.99);
    assert!(err <= 1e-3, "sup error {err}");
    // far from converged after a handful of updates
    assert!(common::frozen_prior_error(10, 0.99) > 1e-2);
}

#[test]
fn matches_closed_form_every_step() {
    let z = [0.5, 0.3, 0.2];
    let mu: f64 = 0.9;
    let mut prior = ClassPrior::uniform(3, mu).unwrap();
    for k in 1..=200 {
        prior.ema_update(&z).unwrap();
        let m = mu.powi(k);
        for (c, &zc) in z.iter().enumerate() {
            let expect = m / 3.0 + (1.0 - m) * zc;
            assert!((prior.r()[c] - expect).abs() <= 1e-12);
        }
    }
    assert_eq!(prior.epoch_count(), 200);
}
