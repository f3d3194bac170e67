//! Naive, seasonal-naive and ridge autoregression forecasts scored with
//! RMSE, MAE and thresholded MAPE on the test split.
//!
//!     cargo run --example baselines

use deepauto::dataprep::{Dataset, OutputKind, WindowSpec};
use deepauto::eval::{compare_report, Forecaster, Naive, RidgeAr, SeasonalNaive, DEFAULT_RIDGE_LAMBDA};
use deepauto::model::DeepAutoConfig;
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let records = generate(&SynthConfig {
        n_cells: 10,
        days: 14,
        ..SynthConfig::default()
    })?;
    let cfg = DeepAutoConfig {
        step_seconds: 900,
        window: WindowSpec::for_step(900, 12, 2, 0),
        output: OutputKind::ScalarHorizons(vec![1, 4, 8]),
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    let ridge = RidgeAr::fit(&ds.train, 0, DEFAULT_RIDGE_LAMBDA)?;
    let seasonal = SeasonalNaive {
        period: cfg.window.period_steps,
    };
    let models: [&dyn Forecaster; 3] = [&Naive, &seasonal, &ridge];
    let report = compare_report(&ds, &models, &ds.test, 0.3);
    print!("{}", report.to_text());
    Ok(())
}
