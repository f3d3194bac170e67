use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::config::DeepAutoConfig;
use super::network::{batch_loss, forward_batch, loss_and_gradients, DeepAutoParams};
use crate::dataprep::{Dataset, OutputKind, ScalerParams, WindowedSample};
use crate::error::{Error, Result};
use crate::neuralnet::{adam_step, AdamState, ParamRng, ParamSet};

/// Evaluation batches are capped independently of the training batch size.
const EVAL_BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Step size used during the epoch.
    pub lr: f64,
}

/// Per-horizon error on the first target channel, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonError {
    pub horizon: usize,
    pub rmse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: DeepAutoConfig,
    pub n_params: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub test_loss: Option<f64>,
    /// Empty for PDF heads.
    pub test_errors: Vec<HorizonError>,
    pub wall_seconds: f64,
}

/// Patience-based stopping on validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Records epoch `epoch` (1-based). Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved = val_loss < self.best;
        if improved {
            self.best = val_loss;
            self.best_epoch = epoch;
        }
        (improved, epoch >= self.best_epoch + self.patience)
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Sample-weighted mean loss, evaluated in fixed-size chunks.
pub fn mean_loss(params: &DeepAutoParams, cfg: &DeepAutoConfig, samples: &[WindowedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples to evaluate".into()));
    }
    let mut total = 0.0;
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&WindowedSample> = chunk.iter().collect();
        total += batch_loss(params, cfg, &refs)? * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Raw network outputs for many samples, computed in chunks.
pub fn predict_scaled(params: &DeepAutoParams, samples: &[WindowedSample]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&WindowedSample> = chunk.iter().collect();
        let (y, _) = forward_batch(params, &refs)?;
        out.extend((0..y.rows()).map(|r| y.row(r).to_vec()));
    }
    Ok(out)
}

/// RMSE and MAE per horizon after inverse scaling of the target channel.
pub fn horizon_errors(
    params: &DeepAutoParams,
    cfg: &DeepAutoConfig,
    scaler: &ScalerParams,
    samples: &[WindowedSample],
) -> Result<Vec<HorizonError>> {
    let OutputKind::ScalarHorizons(horizons) = &cfg.output else {
        return Ok(Vec::new());
    };
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let preds = predict_scaled(params, samples)?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let (mut se, mut ae) = (0.0, 0.0);
            for (p, s) in preds.iter().zip(samples) {
                let e = scaler.invert(0, p[k]) - scaler.invert(0, s.target[k]);
                se += e * e;
                ae += e.abs();
            }
            let n = samples.len() as f64;
            HorizonError {
                horizon: h,
                rmse: (se / n).sqrt(),
                mae: ae / n,
            }
        })
        .collect())
}

/// Mini-batch Adam with seeded shuffling and early stopping. Returns the
/// parameters of the epoch with the lowest validation loss.
pub fn train(
    train: &[WindowedSample],
    val: &[WindowedSample],
    cfg: &DeepAutoConfig,
) -> Result<(DeepAutoParams, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InsufficientData("training needs non-empty train and validation splits".into()));
    }
    let started = Instant::now();
    let mut params = DeepAutoParams::init(cfg);
    let mut best = params.clone();
    let mut adam = AdamState::new(params.num_params());
    // Distinct stream from initialization so changing one never shifts the other.
    let mut rng = ParamRng::seed_from_u64(cfg.seed ^ 0x5eed_5a3d_1e55_0b1e);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = Vec::new();
    let mut lr = cfg.lr;
    let mut since_decay = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&WindowedSample> = idx.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = loss_and_gradients(&params, cfg, &batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            adam_step(&mut params, &grads, &mut adam, lr)?;
            total += loss * batch.len() as f64;
        }
        if !params.all_finite() {
            return Err(Error::Diverged { epoch, loss: f64::NAN });
        }
        let train_loss = total / train.len() as f64;
        let val_loss = mean_loss(&params, cfg, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }
        debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr}");
        epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            best = params.clone();
            since_decay = 0;
        } else {
            since_decay += 1;
            if cfg.lr_patience > 0 && since_decay >= cfg.lr_patience {
                lr *= cfg.lr_decay;
                since_decay = 0;
            }
        }
        if stop {
            info!("early stop at epoch {epoch}, best {}", stopper.best_epoch());
            break;
        }
    }

    let mut report = TrainReport {
        config: cfg.clone(),
        n_params: best.num_params(),
        n_train: train.len(),
        n_val: val.len(),
        n_test: 0,
        epochs,
        best_epoch: stopper.best_epoch(),
        best_val_loss: stopper.best(),
        test_loss: None,
        test_errors: Vec::new(),
        wall_seconds: 0.0,
    };
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok((best, report))
}

/// Trains on a prepared dataset and fills in the test-split figures.
pub fn train_dataset(ds: &Dataset, cfg: &DeepAutoConfig) -> Result<(DeepAutoParams, TrainReport)> {
    let started = Instant::now();
    let (params, mut report) = train(&ds.train, &ds.val, cfg)?;
    if !ds.test.is_empty() {
        report.n_test = ds.test.len();
        report.test_loss = Some(mean_loss(&params, cfg, &ds.test)?);
        report.test_errors = horizon_errors(&params, cfg, &ds.scaler, &ds.test)?;
    }
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_stops_patience_epochs_after_best() {
        let mut s = EarlyStopping::new(2);
        assert_eq!(s.observe(1, 1.0), (true, false));
        assert_eq!(s.observe(2, 0.5), (true, false));
        assert_eq!(s.observe(3, 0.5), (false, false));
        assert_eq!(s.observe(4, 0.7), (false, true));
        assert_eq!(s.best_epoch(), 2);
    }
}
