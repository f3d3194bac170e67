//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use deepauto::dataprep::{write_records, CellRecord, Dataset, OutputKind, WindowSpec};
use deepauto::model::{DeepAutoConfig, DeepAutoParams, Model};
use deepauto::synthgen::{generate, SynthConfig};

/// Clean synthetic records: no gaps, so the stream and batch paths see
/// identical series.
pub fn clean_records(n_cells: usize, days: usize, step_seconds: i64, seed: u64) -> Vec<CellRecord> {
    generate(&SynthConfig {
        n_cells,
        days,
        step_seconds,
        missing_rate: 0.0,
        seed,
        ..SynthConfig::default()
    })
    .expect("generator")
}

/// Small scalar-head configuration for `step_seconds` data.
pub fn small_config(step_seconds: i64, n_r: usize, n_p: usize, horizons: Vec<usize>) -> DeepAutoConfig {
    DeepAutoConfig {
        step_seconds,
        window: WindowSpec::for_step(step_seconds, n_r, n_p, 0),
        hidden_r: 4,
        hidden_p: 4,
        hidden_s: 4,
        ext_embed_dim: 4,
        output: OutputKind::ScalarHorizons(horizons),
        max_epochs: 2,
        batch_size: 256,
        ..DeepAutoConfig::default()
    }
    .resolved()
    .expect("valid config")
}

/// Untrained but randomly initialised model whose scaler is fitted on `records`.
pub fn untrained_model(cfg: &DeepAutoConfig, records: &[CellRecord]) -> Model {
    let ds = Dataset::prepare(records, &cfg.data_spec()).expect("dataset");
    Model {
        config: cfg.clone(),
        params: DeepAutoParams::init(cfg),
        scaler: ds.scaler,
    }
}

pub fn ndjson(records: &[CellRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("serialize records");
    buf
}

/// Every dimension at most 4, all three branches and the external embedding.
/// Bypasses data-layout validation, so it is only used for gradient checks.
pub fn micro_config(output: OutputKind) -> DeepAutoConfig {
    DeepAutoConfig {
        input_dim: 3,
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
        ext_embed_dim: 4,
        output,
        seed: 23,
        ..DeepAutoConfig::default()
    }
}

/// Deterministic samples for [`micro_config`] with targets in range.
pub fn micro_samples(cfg: &DeepAutoConfig, n: usize) -> Vec<deepauto::dataprep::WindowedSample> {
    use deepauto::dataprep::{WindowedSample, EXTERNAL_DIM};
    use deepauto::neuralnet::Tensor2;
    let d = cfg.input_dim;
    (0..n)
        .map(|k| {
            let salt = k as f64 * 0.61;
            let m = |rows: usize, off: f64| {
                let v = (0..rows * d).map(|i| 0.5 + 0.45 * (i as f64 * 0.9 + off + salt).sin()).collect();
                Tensor2::from_vec(rows, d, v).unwrap()
            };
            let target = match &cfg.output {
                OutputKind::ScalarHorizons(h) => (0..h.len()).map(|i| 0.3 + 0.2 * i as f64 + 0.1 * salt.sin()).collect(),
                OutputKind::Pdf(bins) => {
                    let raw: Vec<f64> = (0..*bins).map(|i| 1.2 + (i as f64 * 1.3 + salt).cos()).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / s).collect()
                }
            };
            WindowedSample {
                cell: 0,
                anchor_t: k,
                anchor_ts: 0,
                x_recent: m(cfg.window.n_r, 0.0),
                x_periodic: m(cfg.window.n_p, 1.1),
                x_seasonal: m(cfg.window.n_s, 2.3),
                external: (0..EXTERNAL_DIM).map(|i| ((i as f64) * 0.4 + salt).cos()).collect(),
                target,
            }
        })
        .collect()
}
