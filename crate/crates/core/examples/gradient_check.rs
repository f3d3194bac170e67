//! Checks the hand-written backpropagation of the peephole LSTM and of the
//! full three-branch network against central finite differences.
//!
//!     cargo run --example gradient_check

use deepauto::dataprep::{OutputKind, WindowSpec, WindowedSample, EXTERNAL_DIM};
use deepauto::model::{loss_and_gradients, DeepAutoConfig, DeepAutoParams};
use deepauto::neuralnet::{gradient_check, lstm_backward_sequence, lstm_forward_sequence, LstmCellParams, ParamRng, Tensor2};
use rand::SeedableRng;

fn main() -> deepauto::Result<()> {
    let mut rng = ParamRng::seed_from_u64(1);
    let cell = LstmCellParams::init(3, 4, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|t| vec![0.1 * t as f64, -0.2, 0.3]).collect();
    let upstream = [1.0, -0.5, 0.25, 0.0];
    let report = gradient_check(
        |p: &LstmCellParams| {
            let (h, cache) = lstm_forward_sequence(&xs, p, None)?;
            let loss = h.iter().zip(&upstream).map(|(a, b)| a * b).sum();
            Ok((loss, lstm_backward_sequence(p, &cache, &upstream)?.0))
        },
        &cell,
        1e-5,
    )?;
    println!("LSTM 3→4 over 5 steps: {} coordinates, max relative error {:.2e}", report.coordinates, report.max_rel_error);

    for output in [OutputKind::ScalarHorizons(vec![1, 4]), OutputKind::Pdf(5)] {
        let cfg = DeepAutoConfig {
            input_dim: 2,
            window: WindowSpec {
                n_r: 3,
                n_p: 2,
                n_s: 1,
                period_steps: 4,
                season_steps: 8,
            },
            hidden_r: 3,
            hidden_p: 2,
            hidden_s: 2,
            ext_embed_dim: 3,
            output: output.clone(),
            ..DeepAutoConfig::default()
        };
        let params = DeepAutoParams::init(&cfg);
        let target = match &output {
            OutputKind::ScalarHorizons(h) => vec![0.6; h.len()],
            OutputKind::Pdf(b) => vec![1.0 / *b as f64; *b],
        };
        let m = |rows: usize| Tensor2::from_vec(rows, 2, (0..rows * 2).map(|i| 0.5 + 0.1 * i as f64).collect()).unwrap();
        let sample = WindowedSample {
            cell: 0,
            anchor_t: 0,
            anchor_ts: 0,
            x_recent: m(3),
            x_periodic: m(2),
            x_seasonal: m(1),
            external: vec![0.5; EXTERNAL_DIM],
            target,
        };
        let report = gradient_check(|p| loss_and_gradients(p, &cfg, &[&sample]), &params, 1e-5)?;
        println!("network with {output:?} head: max relative error {:.2e} at {:?}", report.max_rel_error, report.worst);
    }
    Ok(())
}
