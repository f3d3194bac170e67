//! Multi-scale lag windows: recent steps, same time on prior days, same time
//! in prior weeks.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::external::ExternalFeatures;
use super::series::KpiSeries;
use crate::error::{Error, Result};
use crate::neuralnet::Tensor2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Consecutive recent steps `t-n_r .. t-1`.
    pub n_r: usize,
    /// Number of periodic lags (multiples of `period_steps`).
    pub n_p: usize,
    /// Number of seasonal lags (multiples of `season_steps`).
    pub n_s: usize,
    /// Steps per day.
    pub period_steps: usize,
    /// Steps per week.
    pub season_steps: usize,
}

impl WindowSpec {
    /// Daily period and weekly season for data sampled every `step_seconds`.
    pub fn for_step(step_seconds: i64, n_r: usize, n_p: usize, n_s: usize) -> Self {
        let period_steps = (86_400 / step_seconds.max(1)) as usize;
        Self {
            n_r,
            n_p,
            n_s,
            period_steps,
            season_steps: 7 * period_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 {
            return Err(Error::Config("window needs at least one recent lag (n_r >= 1)".into()));
        }
        if self.n_p > 0 && self.period_steps <= self.n_r {
            return Err(Error::Config(format!(
                "period_steps ({}) must exceed n_r ({}) when periodic lags are used",
                self.period_steps, self.n_r
            )));
        }
        if self.n_s > 0 && self.season_steps < self.period_steps {
            return Err(Error::Config("season_steps must be >= period_steps".into()));
        }
        if (self.n_p > 0 && self.period_steps == 0) || (self.n_s > 0 && self.season_steps == 0) {
            return Err(Error::Config("period lengths must be positive".into()));
        }
        Ok(())
    }

    /// Smallest anchor whose lags are all `>= 0`.
    pub fn first_anchor(&self) -> usize {
        self.n_r
            .max(self.n_p * self.period_steps)
            .max(self.n_s * self.season_steps)
    }

    pub fn recent_indices(&self, t: usize) -> Vec<usize> {
        (t - self.n_r..t).collect()
    }

    /// `[t - n_p·P, …, t - 2P, t - P]` in chronological order.
    pub fn periodic_indices(&self, t: usize) -> Vec<usize> {
        (1..=self.n_p).rev().map(|k| t - k * self.period_steps).collect()
    }

    pub fn seasonal_indices(&self, t: usize) -> Vec<usize> {
        (1..=self.n_s).rev().map(|k| t - k * self.season_steps).collect()
    }

    /// Anchors with every lag in range and `max_horizon` future steps available
    /// in a series of length `len`. With `max_horizon == 0` the range extends to
    /// `len` itself, the first unobserved step.
    pub fn valid_anchors(&self, len: usize, max_horizon: usize) -> Range<usize> {
        let first = self.first_anchor();
        let end = (len + 1).saturating_sub(max_horizon.max(1)) + usize::from(max_horizon == 0);
        first..end.max(first)
    }
}

/// What a sample is trained to predict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetSpec {
    /// Next-step value and averages over each horizon on one channel.
    Horizons { channel: usize, horizons: Vec<usize> },
    /// The distribution stored in a run of channels at the anchor step.
    Distribution { channels: Range<usize> },
}

impl TargetSpec {
    pub fn max_horizon(&self) -> usize {
        match self {
            TargetSpec::Horizons { horizons, .. } => horizons.iter().copied().max().unwrap_or(1),
            TargetSpec::Distribution { .. } => 1,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Horizons { horizons, .. } => horizons.len(),
            TargetSpec::Distribution { channels } => channels.len(),
        }
    }
}

/// One training or inference example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    /// Index of the source cell within its dataset.
    pub cell: u32,
    pub anchor_t: usize,
    pub anchor_ts: i64,
    /// `n_r × C`
    pub x_recent: Tensor2,
    /// `n_p × C`
    pub x_periodic: Tensor2,
    /// `n_s × C`
    pub x_seasonal: Tensor2,
    pub external: Vec<f64>,
    /// Empty for inference samples.
    pub target: Vec<f64>,
}

/// `[y_t, mean(y_t..t+h₂), …]`: for each horizon `h` the mean of the `h`
/// values starting at the anchor (a horizon of 1 is the next value).
pub fn aggregate_targets(series: &KpiSeries, channel: usize, t: usize, horizons: &[usize]) -> Result<Vec<f64>> {
    horizons
        .iter()
        .map(|&h| {
            if h == 0 {
                return Err(Error::Config("horizons must be >= 1".into()));
            }
            if t + h > series.len() {
                return Err(Error::InsufficientData(format!(
                    "horizon {h} at anchor {t} exceeds series length {}",
                    series.len()
                )));
            }
            Ok((t..t + h).map(|k| series.values.get(k, channel)).sum::<f64>() / h as f64)
        })
        .collect()
}

fn gather(series: &KpiSeries, idx: &[usize]) -> Tensor2 {
    let nc = series.n_channels();
    let mut m = Tensor2::zeros(idx.len(), nc);
    for (r, &t) in idx.iter().enumerate() {
        m.row_mut(r).copy_from_slice(series.values.row(t));
    }
    m
}

/// Builds the sample anchored at `t`. With `target == None` no future values
/// are read and `t` may equal the series length.
pub fn make_window(series: &KpiSeries, spec: &WindowSpec, t: usize, target: Option<&TargetSpec>) -> Result<WindowedSample> {
    if t < spec.first_anchor() || t > series.len() {
        return Err(Error::InsufficientData(format!(
            "anchor {t} outside [{}, {}]",
            spec.first_anchor(),
            series.len()
        )));
    }
    let target = match target {
        None => Vec::new(),
        Some(TargetSpec::Horizons { channel, horizons }) => aggregate_targets(series, *channel, t, horizons)?,
        Some(TargetSpec::Distribution { channels }) => {
            if t >= series.len() {
                return Err(Error::InsufficientData("distribution target beyond series end".into()));
            }
            series.values.row(t)[channels.clone()].to_vec()
        }
    };
    let anchor_ts = series.ts_at(t);
    Ok(WindowedSample {
        cell: 0,
        anchor_t: t,
        anchor_ts,
        x_recent: gather(series, &spec.recent_indices(t)),
        x_periodic: gather(series, &spec.periodic_indices(t)),
        x_seasonal: gather(series, &spec.seasonal_indices(t)),
        external: ExternalFeatures::at(anchor_ts, &series.config.as_of(anchor_ts)).to_vec(),
        target,
    })
}

/// All training samples of a series, in anchor order, plus a diagnostic when
/// the window does not fit.
pub fn make_windows(series: &KpiSeries, spec: &WindowSpec, target: &TargetSpec) -> Result<(Vec<WindowedSample>, Option<String>)> {
    spec.validate()?;
    let anchors = spec.valid_anchors(series.len(), target.max_horizon());
    if anchors.is_empty() {
        let need = spec.first_anchor() + target.max_horizon();
        return Ok((
            Vec::new(),
            Some(format!(
                "cell {}: series length {} too short for window (needs > {need} steps)",
                series.cell_id,
                series.len()
            )),
        ));
    }
    let samples = anchors
        .map(|t| make_window(series, spec, t, Some(target)))
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(len: usize) -> KpiSeries {
        let rows: Vec<Vec<f64>> = (0..len).map(|t| vec![t as f64]).collect();
        KpiSeries::from_rows("r", 0, 60, vec!["load".into()], &rows).unwrap()
    }

    fn spec(n_r: usize, n_p: usize, n_s: usize, p: usize, s: usize) -> WindowSpec {
        WindowSpec {
            n_r,
            n_p,
            n_s,
            period_steps: p,
            season_steps: s,
        }
    }

    #[test]
    fn recent_indices_by_definition() {
        assert_eq!(spec(3, 0, 0, 10, 70).recent_indices(100), vec![97, 98, 99]);
    }

    #[test]
    fn periodic_indices_daily_at_one_minute() {
        assert_eq!(spec(3, 2, 0, 1440, 10080).periodic_indices(3000), vec![120, 1560]);
    }

    #[test]
    fn anchor_count_for_short_series() {
        let t = TargetSpec::Horizons {
            channel: 0,
            horizons: vec![1],
        };
        let (s, diag) = make_windows(&ramp(10), &spec(3, 0, 0, 10, 70), &t).unwrap();
        assert!(diag.is_none());
        assert_eq!(s.iter().map(|w| w.anchor_t).collect::<Vec<_>>(), (3..10).collect::<Vec<_>>());
        assert_eq!(s[0].x_recent.as_slice(), &[0.0, 1.0, 2.0]);
        assert_eq!(s[0].target, vec![3.0]);
    }

    #[test]
    fn infeasible_window_gives_empty_with_diagnostic() {
        let t = TargetSpec::Horizons {
            channel: 0,
            horizons: vec![1],
        };
        let (s, diag) = make_windows(&ramp(10), &spec(3, 1, 0, 20, 140), &t).unwrap();
        assert!(s.is_empty());
        assert!(diag.unwrap().contains("too short"));
    }

    #[test]
    fn aggregate_targets_constant_and_ramp() {
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![0.3]).collect();
        let c = KpiSeries::from_rows("c", 0, 60, vec!["load".into()], &rows).unwrap();
        for v in aggregate_targets(&c, 0, 5, &[1, 15, 60]).unwrap() {
            assert!((v - 0.3).abs() < 1e-15);
        }
        assert_eq!(aggregate_targets(&ramp(80), 0, 0, &[1, 15, 60]).unwrap(), vec![0.0, 7.0, 29.5]);
        assert_eq!(aggregate_targets(&ramp(80), 0, 5, &[1]).unwrap(), vec![5.0]);
        assert!(aggregate_targets(&ramp(80), 0, 30, &[60]).is_err());
    }

    #[test]
    fn inference_anchor_may_sit_past_the_end() {
        let s = make_window(&ramp(10), &spec(3, 0, 0, 10, 70), 10, None).unwrap();
        assert_eq!(s.x_recent.as_slice(), &[7.0, 8.0, 9.0]);
        assert!(s.target.is_empty());
        assert_eq!(spec(3, 0, 0, 10, 70).valid_anchors(10, 0), 3..11);
    }

    #[test]
    fn validate_rejects_aliasing_periods() {
        assert!(spec(20, 1, 0, 10, 70).validate().is_err());
        assert!(spec(5, 0, 1, 10, 5).validate().is_err());
        assert!(spec(0, 0, 0, 10, 70).validate().is_err());
    }

    proptest! {
        #[test]
        fn windows_never_read_out_of_bounds(
            len in 1usize..300, n_r in 1usize..12, n_p in 0usize..3, n_s in 0usize..2,
            period in 12usize..40, season_mult in 1usize..4, h in 1usize..6,
        ) {
            let sp = spec(n_r, n_p, n_s, period, period * season_mult);
            let target = TargetSpec::Horizons { channel: 0, horizons: vec![1, h] };
            let (samples, _) = make_windows(&ramp(len), &sp, &target).unwrap();
            for w in &samples {
                // ramp values equal their indices
                for v in w.x_recent.as_slice().iter().chain(w.x_periodic.as_slice()).chain(w.x_seasonal.as_slice()) {
                    prop_assert!(*v >= 0.0 && (*v as usize) < w.anchor_t);
                }
                prop_assert!(w.anchor_t + h <= len);
            }
        }
    }
}
