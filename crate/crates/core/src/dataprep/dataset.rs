//! End-to-end preparation: records → per-cell series → interpolated, scaled,
//! windowed, chronologically split samples.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use super::interpolate::interpolate_missing;
use super::record::{CellRecord, RSRQ_BINS};
use super::scaler::ScalerParams;
use super::series::{build_series, expand_channels, is_histogram_channel, KpiSeries};
use super::split::split_counts;
use super::window::{make_window, TargetSpec, WindowSpec, WindowedSample};
use crate::error::{shape_err, Error, Result};
use crate::spatial;

/// Model output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// One sigmoid unit per horizon (in steps) on the first channel.
    ScalarHorizons(Vec<usize>),
    /// Softmax over histogram bins of the RSRQ channels.
    Pdf(usize),
}

/// Everything needed to turn records into samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub step_seconds: i64,
    /// Channel topics; the first scalar channel is the prediction target.
    pub channels: Vec<String>,
    pub window: WindowSpec,
    pub output: OutputKind,
    /// Top-k correlated neighbours whose channels are appended to each cell.
    pub neighbors: usize,
    /// Earliest anchor to emit. Lets windows of different depth share one
    /// sample range.
    #[serde(default)]
    pub anchor_floor: usize,
}

impl DataSpec {
    pub fn channel_names(&self) -> Result<Vec<String>> {
        expand_channels(&self.channels)
    }

    /// Width of `x_t` after neighbour augmentation.
    pub fn input_dim(&self) -> Result<usize> {
        Ok(self.channel_names()?.len() * (1 + self.neighbors))
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        let names = self.channel_names()?;
        match &self.output {
            OutputKind::ScalarHorizons(h) => {
                if h.is_empty() || h.contains(&0) {
                    return Err(Error::Config("horizons must be a non-empty list of steps >= 1".into()));
                }
                if is_histogram_channel(&names[0]) {
                    return Err(Error::Config("scalar head needs a scalar first channel".into()));
                }
                Ok(TargetSpec::Horizons {
                    channel: 0,
                    horizons: h.clone(),
                })
            }
            OutputKind::Pdf(bins) => {
                if *bins != RSRQ_BINS {
                    return Err(Error::Config(format!("pdf head must have {RSRQ_BINS} bins")));
                }
                let start = names
                    .iter()
                    .position(|n| is_histogram_channel(n))
                    .ok_or_else(|| Error::Config("pdf head needs the rsrq channel".into()))?;
                Ok(TargetSpec::Distribution {
                    channels: start..start + RSRQ_BINS,
                })
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step_seconds <= 0 {
            return Err(Error::Config("step_seconds must be positive".into()));
        }
        self.window.validate()?;
        self.target_spec()?;
        Ok(())
    }
}

/// One cell's series and where its samples sit in the split vectors.
#[derive(Debug, Clone)]
pub struct CellData {
    pub cell_id: String,
    /// Interpolated (and augmented), unscaled.
    pub raw: KpiSeries,
    pub scaled: KpiSeries,
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DataSpec,
    pub scaler: ScalerParams,
    pub cells: Vec<CellData>,
    pub train: Vec<WindowedSample>,
    pub val: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub diagnostics: Vec<String>,
}

impl Dataset {
    /// Prepares a dataset from raw records.
    pub fn prepare(records: &[CellRecord], spec: &DataSpec) -> Result<Dataset> {
        spec.validate()?;
        let series = build_series(records, spec.step_seconds, &spec.channels)?;
        Self::from_series(series, spec)
    }

    pub fn from_series(series: Vec<KpiSeries>, spec: &DataSpec) -> Result<Dataset> {
        Self::from_series_with(series, spec, None)
    }

    /// Like [`Dataset::prepare`] but scales with a persisted scaler instead of
    /// fitting one.
    pub fn prepare_with_scaler(records: &[CellRecord], spec: &DataSpec, scaler: &ScalerParams) -> Result<Dataset> {
        spec.validate()?;
        let series = build_series(records, spec.step_seconds, &spec.channels)?;
        Self::from_series_with(series, spec, Some(scaler))
    }

    /// `fixed` replaces the scaler fitted on the training partitions.
    pub fn from_series_with(series: Vec<KpiSeries>, spec: &DataSpec, fixed: Option<&ScalerParams>) -> Result<Dataset> {
        spec.validate()?;
        let target = spec.target_spec()?;
        let mut diagnostics = Vec::new();

        let mut cells = Vec::new();
        for s in series {
            match interpolate_missing(&s) {
                Ok(s) => cells.push(s),
                Err(e) => diagnostics.push(e.to_string()),
            }
        }

        // Anchor ranges and chronological split counts per cell.
        let mut plans = Vec::new();
        for s in cells {
            let anchors = spec.window.valid_anchors(s.len(), target.max_horizon());
            let anchors = anchors.start.max(spec.anchor_floor).min(anchors.end)..anchors.end;
            match split_counts(anchors.len()) {
                Ok(counts) => plans.push((s, anchors, counts)),
                Err(_) => diagnostics.push(format!(
                    "cell {}: {} usable anchors, need at least 6; skipped",
                    s.cell_id,
                    anchors.len()
                )),
            }
        }
        if plans.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no cell has enough history for the window; {}",
                diagnostics.join("; ")
            )));
        }

        // Rows before the first validation anchor form the training partition.
        let train_end: Vec<usize> = plans.iter().map(|(_, a, c)| a.start + c.0).collect();

        if spec.neighbors > 0 {
            let raw: Vec<KpiSeries> = plans.iter().map(|p| p.0.clone()).collect();
            let fit_end = train_end.iter().copied().min().unwrap_or(0);
            let graph = spatial::build_graph(&raw, 0, 0..fit_end)?;
            for (i, plan) in plans.iter_mut().enumerate() {
                let ranked = spatial::topk_neighbors(&graph, &raw[i].cell_id, spec.neighbors)?;
                if ranked.len() < spec.neighbors {
                    return Err(Error::InsufficientData(format!(
                        "cell {} has only {} neighbours, {} requested",
                        raw[i].cell_id,
                        ranked.len(),
                        spec.neighbors
                    )));
                }
                let nb: Vec<&KpiSeries> = ranked
                    .iter()
                    .map(|id| raw.iter().find(|s| &s.cell_id == id).expect("graph node"))
                    .collect();
                plan.0 = spatial::augment_inputs(&raw[i], &nb)?;
            }
        }

        let scaler = match fixed {
            Some(s) if s.n_channels() == spec.input_dim()? => s.clone(),
            Some(s) => return Err(shape_err("Dataset scaler channels", spec.input_dim()?, s.n_channels())),
            None => {
                let fit_input: Vec<(&KpiSeries, usize)> = plans.iter().zip(&train_end).map(|(p, e)| (&p.0, *e)).collect();
                ScalerParams::fit_series(&fit_input)?
            }
        };
        if scaler.has_constant_channel() {
            warn!("scaler: constant channel in training data maps to 0");
            diagnostics.push("constant channel in training partition".into());
        }

        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        let mut out_cells = Vec::new();
        for (idx, (raw, anchors, (n_train, n_val, _))) in plans.into_iter().enumerate() {
            let scaled = scaler.apply_series(&raw)?;
            let tr = train.len()..train.len() + n_train;
            let va = val.len()..val.len() + n_val;
            let te_start = test.len();
            for (k, t) in anchors.enumerate() {
                let mut w = make_window(&scaled, &spec.window, t, Some(&target))?;
                w.cell = idx as u32;
                if k < n_train {
                    train.push(w);
                } else if k < n_train + n_val {
                    val.push(w);
                } else {
                    test.push(w);
                }
            }
            out_cells.push(CellData {
                cell_id: raw.cell_id.clone(),
                raw,
                scaled,
                train: tr,
                val: va,
                test: te_start..test.len(),
            });
        }
        Ok(Dataset {
            spec: spec.clone(),
            scaler,
            cells: out_cells,
            train,
            val,
            test,
            diagnostics,
        })
    }

    /// Inverse-scales a target-channel value to raw units.
    pub fn unscale_target(&self, v: f64) -> f64 {
        match self.spec.output {
            OutputKind::ScalarHorizons(_) => self.scaler.invert(0, v),
            OutputKind::Pdf(_) => v,
        }
    }
}

/// Series ready for inference with a persisted scaler: interpolated, scaled.
pub fn inference_series(records: &[CellRecord], spec: &DataSpec, scaler: &ScalerParams) -> Result<Vec<KpiSeries>> {
    if spec.neighbors > 0 {
        return Err(Error::Config("inference with neighbour augmentation is not supported".into()));
    }
    let series = build_series(records, spec.step_seconds, &spec.channels)?;
    let mut out = Vec::with_capacity(series.len());
    for s in series {
        match interpolate_missing(&s) {
            Ok(s) => out.push(scaler.apply_series(&s)?),
            Err(e) => warn!("skipping cell: {e}"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::record::Topic;

    fn records(cells: usize, steps: usize) -> Vec<CellRecord> {
        let mut out = Vec::new();
        for t in 0..steps {
            for c in 0..cells {
                let v = 0.5 + 0.4 * ((t as f64) / 10.0 + c as f64).sin();
                out.push(CellRecord::new(Topic::Load, format!("c{c}"), (t * 60) as i64, v));
                out.push(CellRecord::new(Topic::Ue, format!("c{c}"), (t * 60) as i64, 100.0 * v));
            }
        }
        out
    }

    fn spec() -> DataSpec {
        DataSpec {
            step_seconds: 60,
            channels: vec!["load".into(), "ue".into()],
            window: WindowSpec {
                n_r: 4,
                n_p: 0,
                n_s: 0,
                period_steps: 1440,
                season_steps: 10080,
            },
            output: OutputKind::ScalarHorizons(vec![1, 3]),
            neighbors: 0,
            anchor_floor: 0,
        }
    }

    #[test]
    fn splits_each_cell_in_time_order() {
        let ds = Dataset::prepare(&records(2, 100), &spec()).unwrap();
        // 100 steps, first anchor 4, last anchor 97 → 94 samples per cell
        assert_eq!(ds.train.len() + ds.val.len() + ds.test.len(), 188);
        for (i, c) in ds.cells.iter().enumerate() {
            let last_train = ds.train[c.train.clone()].last().unwrap().anchor_t;
            let first_val = ds.val[c.val.clone()].first().unwrap().anchor_t;
            let first_test = ds.test[c.test.clone()].first().unwrap().anchor_t;
            assert!(last_train < first_val && first_val < first_test);
            assert!(ds.train[c.train.clone()].iter().all(|s| s.cell == i as u32));
        }
    }

    #[test]
    fn scaler_ignores_validation_and_test_rows() {
        let mut recs = records(1, 100);
        // An extreme UE count late in the series must not widen the scaler.
        recs.push(CellRecord::new(Topic::Ue, "c0", 99 * 60, 1e6));
        let ds = Dataset::prepare(&recs, &spec()).unwrap();
        assert!(ds.scaler.max[1] < 1000.0);
        let all_rows: Vec<&[f64]> = (0..100).map(|t| ds.cells[0].raw.values.row(t)).collect();
        let leaky = ScalerParams::fit(all_rows, 2).unwrap();
        assert!(leaky.max[1] > ds.scaler.max[1]);
    }

    #[test]
    fn anchor_floor_trims_leading_samples() {
        let mut sp = spec();
        sp.anchor_floor = 10;
        let ds = Dataset::prepare(&records(1, 100), &sp).unwrap();
        assert_eq!(ds.train[0].anchor_t, 10);
        assert_eq!(ds.train.len() + ds.val.len() + ds.test.len(), 88);
    }

    #[test]
    fn too_short_cells_are_reported() {
        let err = Dataset::prepare(&records(1, 8), &spec()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }
}
