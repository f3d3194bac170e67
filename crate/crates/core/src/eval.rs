//! Baseline forecasters, error metrics and the algorithm comparison report.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataprep::{Dataset, KpiSeries, TargetSpec, WindowedSample};
use crate::error::{shape_err, Error, Result};
use crate::model::Model;
use crate::neuralnet::{kl_loss, Tensor2};

/// Default MAPE load threshold.
pub const DEFAULT_MAPE_THRESHOLD: f64 = 0.7;

/// Ridge penalty used by the comparison report's AR baseline.
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-3;

/// Every horizon predicted as the last observed value `y_{t-1}`.
pub fn naive_predict(series: &KpiSeries, channel: usize, t: usize, horizons: &[usize]) -> Result<Vec<f64>> {
    if t == 0 || t > series.len() {
        return Err(Error::InsufficientData(format!("naive prediction needs 1 <= t <= {}, got {t}", series.len())));
    }
    Ok(vec![series.values.get(t - 1, channel); horizons.len()])
}

/// Each horizon target predicted by the same window one period earlier.
pub fn seasonal_naive_predict(series: &KpiSeries, channel: usize, t: usize, period: usize, horizons: &[usize]) -> Result<Vec<f64>> {
    if period == 0 || t < period || t > series.len() {
        return Err(Error::InsufficientData(format!("seasonal naive needs period <= t, got t={t}, period={period}")));
    }
    horizons
        .iter()
        .map(|&h| {
            if h == 0 || h > period {
                return Err(Error::Config(format!("horizon {h} must lie in 1..={period}")));
            }
            Ok((t - period..t - period + h).map(|k| series.values.get(k, channel)).sum::<f64>() / h as f64)
        })
        .collect()
}

/// Ridge solution of `X B ≈ Y` for every column of `Y`, with an optional
/// unpenalized intercept. Returns `(coefficients p × k, intercepts k)`.
pub fn ridge_solve(x: &Tensor2, y: &Tensor2, lambda: f64, intercept: bool) -> Result<(Tensor2, Vec<f64>)> {
    if x.rows() != y.rows() || x.rows() == 0 {
        return Err(shape_err("ridge_solve rows", x.rows(), y.rows()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    let (n, p, k) = (x.rows(), x.cols(), y.cols());
    let q = p + usize::from(intercept);
    let a = DMatrix::from_fn(n, q, |r, c| if c < p { x.get(r, c) } else { 1.0 });
    let b = DMatrix::from_fn(n, k, |r, c| y.get(r, c));
    let mut gram = a.transpose() * &a;
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = a.transpose() * b;
    let sol = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            // Not positive definite: only possible without a penalty.
            let lu = gram.lu();
            if lambda > 0.0 || !lu.is_invertible() {
                return Err(Error::Singular);
            }
            lu.solve(&rhs).ok_or(Error::Singular)?
        }
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let mut coef = Tensor2::zeros(p, k);
    for r in 0..p {
        for c in 0..k {
            coef.set(r, c, sol[(r, c)]);
        }
    }
    let icpt = (0..k).map(|c| if intercept { sol[(p, c)] } else { 0.0 }).collect();
    Ok((coef, icpt))
}

/// Linear autoregression on the target channel's window lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeAr {
    pub channel: usize,
    pub lambda: f64,
    /// `n_lags × n_outputs`.
    pub coef: Tensor2,
    pub intercept: Vec<f64>,
}

/// Recent, periodic and seasonal values of `channel`, oldest first per group.
pub fn lag_features(s: &WindowedSample, channel: usize) -> Vec<f64> {
    let col = |m: &Tensor2| (0..m.rows()).map(|r| m.get(r, channel)).collect::<Vec<_>>();
    let mut f = col(&s.x_recent);
    f.extend(col(&s.x_periodic));
    f.extend(col(&s.x_seasonal));
    f
}

impl RidgeAr {
    pub fn fit(samples: &[WindowedSample], channel: usize, lambda: f64) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InsufficientData("ridge AR needs training samples".into()))?;
        let p = lag_features(first, channel).len();
        let k = first.target.len();
        let mut x = Tensor2::zeros(samples.len(), p);
        let mut y = Tensor2::zeros(samples.len(), k);
        for (r, s) in samples.iter().enumerate() {
            x.row_mut(r).copy_from_slice(&lag_features(s, channel));
            if s.target.len() != k {
                return Err(shape_err("ridge AR target", k, s.target.len()));
            }
            y.row_mut(r).copy_from_slice(&s.target);
        }
        let (coef, intercept) = ridge_solve(&x, &y, lambda, true)?;
        Ok(Self {
            channel,
            lambda,
            coef,
            intercept,
        })
    }

    pub fn predict(&self, s: &WindowedSample) -> Result<Vec<f64>> {
        let f = lag_features(s, self.channel);
        if f.len() != self.coef.rows() {
            return Err(shape_err("ridge AR features", self.coef.rows(), f.len()));
        }
        Ok((0..self.coef.cols())
            .map(|c| self.intercept[c] + f.iter().enumerate().map(|(r, v)| v * self.coef.get(r, c)).sum::<f64>())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when no sample exceeds the threshold.
    pub mape: Option<f64>,
}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(shape_err("metric inputs", y.len(), y_hat.len()));
    }
    if y.is_empty() {
        return Err(Error::InsufficientData("metrics need at least one sample".into()));
    }
    Ok(())
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok((y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// `100 · mean(|y - ŷ| / y)` over samples with `y > threshold`.
pub fn mape_thresholded(y: &[f64], y_hat: &[f64], threshold: f64) -> Result<Option<f64>> {
    check_pair(y, y_hat)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("MAPE threshold must lie in [0, 1], got {threshold}")));
    }
    let (sum, n) = y
        .iter()
        .zip(y_hat)
        .filter(|(a, _)| **a > threshold)
        .fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b).abs() / a, n + 1));
    Ok((n > 0).then(|| 100.0 * sum / n as f64))
}

impl Metrics {
    pub fn compute(y: &[f64], y_hat: &[f64], threshold: f64) -> Result<Self> {
        Ok(Self {
            rmse: rmse(y, y_hat)?,
            mae: mae(y, y_hat)?,
            mape: mape_thresholded(y, y_hat, threshold)?,
        })
    }
}

/// Mean KL divergence between true and predicted histograms (rows).
pub fn kl_eval(p: &[Vec<f64>], q: &[Vec<f64>]) -> Result<f64> {
    let pt = Tensor2::from_rows(p)?;
    let qt = Tensor2::from_rows(q)?;
    kl_loss(&pt, &qt)
}

/// Anything that predicts a sample's target in the scaled domain.
pub trait Forecaster {
    fn name(&self) -> String;
    fn predict(&self, ds: &Dataset, sample: &WindowedSample) -> Result<Vec<f64>>;
}

/// Repeats the last observed value (or histogram).
pub struct Naive;

impl Forecaster for Naive {
    fn name(&self) -> String {
        "naive".into()
    }

    fn predict(&self, ds: &Dataset, s: &WindowedSample) -> Result<Vec<f64>> {
        match ds.spec.target_spec()? {
            TargetSpec::Horizons { channel, horizons } => {
                naive_predict(&ds.cells[s.cell as usize].scaled, channel, s.anchor_t, &horizons)
            }
            TargetSpec::Distribution { channels } => {
                let series = &ds.cells[s.cell as usize].scaled;
                if s.anchor_t == 0 {
                    return Err(Error::InsufficientData("naive histogram needs t >= 1".into()));
                }
                Ok(series.values.row(s.anchor_t - 1)[channels].to_vec())
            }
        }
    }
}

/// Same window one period (a day by default) earlier.
pub struct SeasonalNaive {
    pub period: usize,
}

impl Forecaster for SeasonalNaive {
    fn name(&self) -> String {
        "seasonal-naive".into()
    }

    fn predict(&self, ds: &Dataset, s: &WindowedSample) -> Result<Vec<f64>> {
        match ds.spec.target_spec()? {
            TargetSpec::Horizons { channel, horizons } => {
                seasonal_naive_predict(&ds.cells[s.cell as usize].scaled, channel, s.anchor_t, self.period, &horizons)
            }
            TargetSpec::Distribution { .. } => Err(Error::Config("seasonal naive supports scalar targets only".into())),
        }
    }
}

impl Forecaster for RidgeAr {
    fn name(&self) -> String {
        "ridge-ar".into()
    }

    fn predict(&self, _ds: &Dataset, s: &WindowedSample) -> Result<Vec<f64>> {
        RidgeAr::predict(self, s)
    }
}

impl Forecaster for Model {
    fn name(&self) -> String {
        "deepauto".into()
    }

    fn predict(&self, _ds: &Dataset, s: &WindowedSample) -> Result<Vec<f64>> {
        crate::model::forward(&self.params, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub horizon: usize,
    pub rmse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub algorithm: String,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedModel {
    pub algorithm: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kl_rows: Vec<KlRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailedModel>,
}

fn evaluate_one(ds: &Dataset, model: &dyn Forecaster, samples: &[WindowedSample], threshold: f64) -> Result<(Vec<ReportRow>, Option<KlRow>)> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples in the evaluated split".into()));
    }
    let preds = samples.iter().map(|s| model.predict(ds, s)).collect::<Result<Vec<_>>>()?;
    match ds.spec.target_spec()? {
        TargetSpec::Horizons { horizons, .. } => {
            let mut rows = Vec::new();
            for (k, &h) in horizons.iter().enumerate() {
                let y: Vec<f64> = samples.iter().map(|s| ds.unscale_target(s.target[k])).collect();
                let y_hat: Vec<f64> = preds.iter().map(|p| ds.unscale_target(p[k])).collect();
                let m = Metrics::compute(&y, &y_hat, threshold)?;
                rows.push(ReportRow {
                    algorithm: model.name(),
                    horizon: h,
                    rmse: m.rmse,
                    mae: m.mae,
                    mape: m.mape,
                });
            }
            Ok((rows, None))
        }
        TargetSpec::Distribution { .. } => {
            let p: Vec<Vec<f64>> = samples.iter().map(|s| s.target.clone()).collect();
            Ok((
                Vec::new(),
                Some(KlRow {
                    algorithm: model.name(),
                    kl: kl_eval(&p, &preds)?,
                }),
            ))
        }
    }
}

/// Scores every model on `samples`. A failing model is listed under
/// `failures` and the others still run.
pub fn compare_report(ds: &Dataset, models: &[&dyn Forecaster], samples: &[WindowedSample], threshold: f64) -> CompareReport {
    let mut report = CompareReport::default();
    for m in models {
        match evaluate_one(ds, *m, samples, threshold) {
            Ok((rows, kl)) => {
                report.rows.extend(rows);
                report.kl_rows.extend(kl);
            }
            Err(e) => report.failures.push(FailedModel {
                algorithm: m.name(),
                error: e.to_string(),
            }),
        }
    }
    report
}

impl CompareReport {
    pub fn row(&self, algorithm: &str, horizon: usize) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.horizon == horizon)
    }

    pub fn kl(&self, algorithm: &str) -> Option<f64> {
        self.kl_rows.iter().find(|r| r.algorithm == algorithm).map(|r| r.kl)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.rows.is_empty() {
            writeln!(out, "{:<16} {:>7} {:>10} {:>10} {:>9}", "algorithm", "horizon", "RMSE", "MAE", "MAPE%").unwrap();
            for r in &self.rows {
                let mape = r.mape.map_or_else(|| "n/a".to_string(), |m| format!("{m:.3}"));
                writeln!(out, "{:<16} {:>7} {:>10.6} {:>10.6} {:>9}", r.algorithm, r.horizon, r.rmse, r.mae, mape).unwrap();
            }
        }
        if !self.kl_rows.is_empty() {
            writeln!(out, "{:<16} {:>10}", "algorithm", "KL").unwrap();
            for r in &self.kl_rows {
                writeln!(out, "{:<16} {:>10.6}", r.algorithm, r.kl).unwrap();
            }
        }
        for f in &self.failures {
            writeln!(out, "{:<16} failed: {}", f.algorithm, f.error).unwrap();
        }
        out
    }
}
