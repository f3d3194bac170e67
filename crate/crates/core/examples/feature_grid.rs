//! Trains one model per feature setting (recent window length, periodic
//! lags, external features) and ranks them by validation RMSE.
//!
//!     cargo run --release --example feature_grid

use deepauto::dataprep::{build_series, OutputKind, WindowSpec};
use deepauto::model::{default_candidates, grid_search, DeepAutoConfig};
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let synth = SynthConfig {
        n_cells: 12,
        days: 14,
        ..SynthConfig::default()
    };
    let records = generate(&synth)?;
    let base = DeepAutoConfig {
        step_seconds: 900,
        window: WindowSpec::for_step(900, 5, 0, 0),
        output: OutputKind::ScalarHorizons(vec![1, 8]),
        hidden_r: 12,
        hidden_p: 12,
        hidden_s: 12,
        ext_embed_dim: 8,
        max_epochs: 8,
        batch_size: 512,
        ..DeepAutoConfig::default()
    };
    let series = build_series(&records, base.step_seconds, &base.channels)?;
    let report = grid_search(&series, &base, &default_candidates())?;
    print!("{}", report.to_text());
    Ok(())
}
