use serde::{Deserialize, Serialize};

use super::series::{is_fraction_channel, KpiSeries};
use crate::error::{shape_err, Error, Result};

/// Per-channel min-max feature scaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Channels whose fitted range was empty; they map to 0.
    pub constant: Vec<bool>,
}

impl ScalerParams {
    /// Leaves values in `[0, 1]` unchanged.
    pub fn identity(n_channels: usize) -> Self {
        Self {
            min: vec![0.0; n_channels],
            max: vec![1.0; n_channels],
            constant: vec![false; n_channels],
        }
    }

    /// Fits per-channel ranges over the given rows. Non-finite values are ignored.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, n_channels: usize) -> Result<Self> {
        let mut min = vec![f64::INFINITY; n_channels];
        let mut max = vec![f64::NEG_INFINITY; n_channels];
        for row in rows {
            if row.len() != n_channels {
                return Err(shape_err("ScalerParams::fit", n_channels, row.len()));
            }
            for (c, &v) in row.iter().enumerate() {
                if v.is_finite() {
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        if min.iter().any(|m| !m.is_finite()) {
            return Err(Error::InsufficientData("scaler fit saw no values for a channel".into()));
        }
        let constant = min.iter().zip(&max).map(|(a, b)| b <= a).collect();
        Ok(Self { min, max, constant })
    }

    /// Fits on rows `[0, end)` of each series; fraction channels stay unscaled.
    pub fn fit_series(series: &[(&KpiSeries, usize)]) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::InsufficientData("no series to fit scaler".into()))?
            .0;
        let nc = first.n_channels();
        let rows = series
            .iter()
            .flat_map(|(s, end)| (0..(*end).min(s.len())).map(move |t| s.values.row(t)));
        let mut p = Self::fit(rows, nc)?;
        for (c, name) in first.channels.iter().enumerate() {
            if is_fraction_channel(name) {
                p.min[c] = 0.0;
                p.max[c] = 1.0;
                p.constant[c] = false;
            }
        }
        Ok(p)
    }

    pub fn n_channels(&self) -> usize {
        self.min.len()
    }

    pub fn has_constant_channel(&self) -> bool {
        self.constant.iter().any(|c| *c)
    }

    /// `(x - min) / (max - min)`, clamped to `[0, 1]`.
    #[inline]
    pub fn apply(&self, c: usize, x: f64) -> f64 {
        if self.constant[c] {
            return 0.0;
        }
        ((x - self.min[c]) / (self.max[c] - self.min[c])).clamp(0.0, 1.0)
    }

    #[inline]
    pub fn invert(&self, c: usize, y: f64) -> f64 {
        if self.constant[c] {
            return self.min[c];
        }
        self.min[c] + y * (self.max[c] - self.min[c])
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = self.apply(c, *v);
        }
    }

    pub fn apply_series(&self, series: &KpiSeries) -> Result<KpiSeries> {
        if series.n_channels() != self.n_channels() {
            return Err(shape_err("ScalerParams::apply_series", self.n_channels(), series.n_channels()));
        }
        let mut out = series.clone();
        for t in 0..out.len() {
            self.apply_row(out.values.row_mut(t));
        }
        Ok(out)
    }
}
