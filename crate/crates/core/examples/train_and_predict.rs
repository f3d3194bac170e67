//! Trains the load forecaster on synthetic 15-minute data and compares it
//! with the naive and ridge baselines at 15-minute and 2-hour horizons.
//!
//!     cargo run --release --example train_and_predict

use deepauto::dataprep::{Dataset, OutputKind, WindowSpec};
use deepauto::eval::{compare_report, Forecaster, Naive, RidgeAr, DEFAULT_RIDGE_LAMBDA};
use deepauto::model::{train_dataset, DeepAutoConfig, Model};
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let records = generate(&SynthConfig {
        n_cells: 12,
        days: 21,
        ..SynthConfig::default()
    })?;
    let cfg = DeepAutoConfig {
        step_seconds: 900,
        window: WindowSpec::for_step(900, 20, 2, 0),
        output: OutputKind::ScalarHorizons(vec![1, 8]),
        hidden_r: 16,
        hidden_p: 16,
        hidden_s: 16,
        ext_embed_dim: 8,
        max_epochs: 12,
        batch_size: 512,
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    let (params, report) = train_dataset(&ds, &cfg)?;
    for e in &report.epochs {
        println!("epoch {:>2}  train {:.6}  val {:.6}  lr {:.5}", e.epoch, e.train_loss, e.val_loss, e.lr);
    }
    let model = Model {
        config: cfg,
        params,
        scaler: ds.scaler.clone(),
    };
    let ridge = RidgeAr::fit(&ds.train, 0, DEFAULT_RIDGE_LAMBDA)?;
    let models: [&dyn Forecaster; 3] = [&Naive, &ridge, &model];
    print!("{}", compare_report(&ds, &models, &ds.test, 0.3).to_text());

    let s = &ds.test[0];
    let y = model.predict_sample(s)?;
    println!("cell {} at ts {}: next 15 min {:.3}, next 2 h {:.3}", ds.cells[s.cell as usize].cell_id, s.anchor_ts, y[0], y[1]);
    Ok(())
}
