//! Predicts the next 5-minute RSRQ histogram with the softmax head and
//! scores it by KL divergence against the previous-bucket predictor.
//!
//!     cargo run --release --example rsrq_distribution

use deepauto::dataprep::{Dataset, OutputKind, WindowSpec};
use deepauto::eval::{compare_report, Forecaster, Naive};
use deepauto::model::{train_dataset, DeepAutoConfig, Model};
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let records = generate(&SynthConfig {
        n_cells: 8,
        days: 4,
        ..SynthConfig::channel_quality()
    })?;
    let cfg = DeepAutoConfig {
        step_seconds: 300,
        channels: vec!["rsrq".into()],
        window: WindowSpec::for_step(300, 6, 1, 0),
        output: OutputKind::Pdf(35),
        hidden_r: 16,
        hidden_p: 16,
        hidden_s: 16,
        ext_embed_dim: 8,
        max_epochs: 8,
        batch_size: 256,
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    let (params, _) = train_dataset(&ds, &cfg)?;
    let model = Model {
        config: cfg,
        params,
        scaler: ds.scaler.clone(),
    };
    let models: [&dyn Forecaster; 2] = [&Naive, &model];
    print!("{}", compare_report(&ds, &models, &ds.test, 0.0).to_text());

    let q = model.predict_sample(&ds.test[0])?;
    let mode = q.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    println!("most likely RSRQ bin for the first test bucket: {mode} (p = {:.3})", q[mode]);
    Ok(())
}
