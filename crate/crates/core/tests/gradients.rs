mod common;

use deepauto::dataprep::OutputKind;
use deepauto::model::{loss_and_gradients, DeepAutoParams};
use deepauto::neuralnet::{gradient_check, lstm_backward_sequence, lstm_forward_sequence, LstmCellParams, ParamRng};
use rand::SeedableRng;

use common::{micro_config, micro_samples};

/// Loss `Σ u_k h_k` of the final hidden state for a fixed upstream `u`.
fn check_lstm(input: usize, hidden: usize, len: usize, seed: u64) -> f64 {
    let mut rng = ParamRng::seed_from_u64(seed);
    let p = LstmCellParams::init(input, hidden, &mut rng);
    let xs: Vec<Vec<f64>> = (0..len)
        .map(|t| (0..input).map(|i| ((t * input + i) as f64 * 0.77).sin()).collect())
        .collect();
    let upstream: Vec<f64> = (0..hidden).map(|k| 0.5 - 0.3 * k as f64).collect();
    let report = gradient_check(
        |q: &LstmCellParams| {
            let (h, cache) = lstm_forward_sequence(&xs, q, None)?;
            let loss = h.iter().zip(&upstream).map(|(a, b)| a * b).sum();
            let (g, _) = lstm_backward_sequence(q, &cache, &upstream)?;
            Ok((loss, g))
        },
        &p,
        1e-5,
    )
    .unwrap();
    report.max_rel_error
}

#[test]
fn single_unit_lstm_over_two_steps() {
    let err = check_lstm(1, 1, 2, 5);
    assert!(err <= 1e-5, "max relative error {err}");
}

#[test]
fn small_lstm_over_five_steps() {
    let err = check_lstm(3, 4, 5, 8);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn micro_model_gradients_for_both_losses() {
    for output in [OutputKind::ScalarHorizons(vec![1, 3]), OutputKind::Pdf(4)] {
        let cfg = micro_config(output);
        let p = DeepAutoParams::init(&cfg);
        let samples = micro_samples(&cfg, 4);
        let refs: Vec<_> = samples.iter().collect();
        let report = gradient_check(|q| loss_and_gradients(q, &cfg, &refs), &p, 1e-5).unwrap();
        assert!(report.passes(1e-4), "{:?}: worst {:?} error {}", cfg.output, report.worst, report.max_rel_error);
    }
}
