//! The forecasting network, its training loop, the feature-setting grid and
//! the model file format.

mod config;
mod grid;
mod network;
mod persist;
mod train;

pub use config::DeepAutoConfig;
pub use grid::{default_candidates, grid_search, run_candidate, shared_anchor_floor, CandidateRun, GridCandidate, GridReport, GridRow};
pub use network::{batch_loss, forward, forward_batch, loss_and_gradients, DeepAutoParams, ForwardCache};
pub use persist::{Model, FORMAT_VERSION, MAGIC};
pub use train::{
    horizon_errors, mean_loss, predict_scaled, train, train_dataset, EarlyStopping, EpochLog, HorizonError, TrainReport,
};

use crate::dataprep::{make_window, KpiSeries, OutputKind, WindowedSample};
use crate::error::Result;

impl Model {
    /// Outputs for one scaled sample, mapped back to raw units.
    pub fn predict_sample(&self, sample: &WindowedSample) -> Result<Vec<f64>> {
        let y = forward(&self.params, sample)?;
        Ok(match self.config.output {
            OutputKind::ScalarHorizons(_) => y.into_iter().map(|v| self.scaler.invert(0, v)).collect(),
            OutputKind::Pdf(_) => y,
        })
    }

    /// Prediction anchored at step `t` of an already scaled series; `t` may
    /// equal the series length.
    pub fn predict_at(&self, scaled: &KpiSeries, t: usize) -> Result<Vec<f64>> {
        self.predict_sample(&make_window(scaled, &self.config.window, t, None)?)
    }
}
