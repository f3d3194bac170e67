//! Feature-setting ablation: one model per window/external combination.

use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use super::config::DeepAutoConfig;
use super::network::DeepAutoParams;
use super::train::{horizon_errors, train_dataset, TrainReport};
use crate::dataprep::{Dataset, KpiSeries, OutputKind, WindowSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub n_r: usize,
    pub n_p: usize,
    pub n_s: usize,
    pub use_external: bool,
}

impl GridCandidate {
    pub fn new(n_r: usize, n_p: usize, n_s: usize, use_external: bool) -> Self {
        Self {
            n_r,
            n_p,
            n_s,
            use_external,
        }
    }

    /// `l_r=20, l_p=2, +ext` style label.
    pub fn label(&self) -> String {
        let mut s = format!("l_r={}", self.n_r);
        if self.n_p > 0 {
            write!(s, ", l_p={}", self.n_p).unwrap();
        }
        if self.n_s > 0 {
            write!(s, ", l_s={}", self.n_s).unwrap();
        }
        if self.use_external {
            s.push_str(", +ext");
        }
        s
    }

    pub fn window(&self, base: &WindowSpec) -> WindowSpec {
        WindowSpec {
            n_r: self.n_r,
            n_p: self.n_p,
            n_s: self.n_s,
            ..base.clone()
        }
    }

    pub fn apply(&self, base: &DeepAutoConfig) -> DeepAutoConfig {
        DeepAutoConfig {
            window: self.window(&base.window),
            use_external: self.use_external,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub setting: String,
    pub candidate: GridCandidate,
    pub n_params: Option<usize>,
    pub best_epoch: Option<usize>,
    pub val_loss: Option<f64>,
    /// Validation RMSE in raw units pooled over every horizon (scalar heads).
    pub val_rmse: Option<f64>,
    /// Set when the candidate failed; the grid continues.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub base_config: DeepAutoConfig,
    /// Shared first anchor for all candidates.
    pub anchor_floor: usize,
    pub rows: Vec<GridRow>,
}

/// A trained candidate, kept for callers that reuse the models.
pub struct CandidateRun {
    pub config: DeepAutoConfig,
    pub dataset: Dataset,
    pub params: DeepAutoParams,
    pub report: TrainReport,
}

/// The default settings: short and long recent windows, then periodic
/// history, then periodic history with external features.
pub fn default_candidates() -> Vec<GridCandidate> {
    vec![
        GridCandidate::new(5, 0, 0, false),
        GridCandidate::new(20, 0, 0, false),
        GridCandidate::new(20, 1, 0, false),
        GridCandidate::new(20, 2, 0, true),
    ]
}

/// Earliest anchor valid for every candidate, so all score the same instants.
pub fn shared_anchor_floor(base: &DeepAutoConfig, candidates: &[GridCandidate]) -> usize {
    candidates
        .iter()
        .map(|c| c.window(&base.window).first_anchor())
        .max()
        .unwrap_or(0)
        .max(base.anchor_floor)
}

pub fn run_candidate(series: &[KpiSeries], base: &DeepAutoConfig, cand: &GridCandidate, anchor_floor: usize) -> Result<CandidateRun> {
    let config = DeepAutoConfig {
        anchor_floor,
        ..cand.apply(base)
    }
    .resolved()?;
    let dataset = Dataset::from_series(series.to_vec(), &config.data_spec())?;
    let (params, report) = train_dataset(&dataset, &config)?;
    Ok(CandidateRun {
        config,
        dataset,
        params,
        report,
    })
}

impl GridRow {
    pub fn from_run(cand: &GridCandidate, run: &CandidateRun) -> Result<Self> {
        let val_rmse = match run.config.output {
            OutputKind::ScalarHorizons(_) => {
                let errs = horizon_errors(&run.params, &run.config, &run.dataset.scaler, &run.dataset.val)?;
                (!errs.is_empty()).then(|| (errs.iter().map(|e| e.rmse * e.rmse).sum::<f64>() / errs.len() as f64).sqrt())
            }
            OutputKind::Pdf(_) => None,
        };
        Ok(Self {
            setting: cand.label(),
            candidate: cand.clone(),
            n_params: Some(run.report.n_params),
            best_epoch: Some(run.report.best_epoch),
            val_loss: Some(run.report.best_val_loss),
            val_rmse,
            error: None,
        })
    }

    pub fn failed(cand: &GridCandidate, err: &Error) -> Self {
        Self {
            setting: cand.label(),
            candidate: cand.clone(),
            n_params: None,
            best_epoch: None,
            val_loss: None,
            val_rmse: None,
            error: Some(err.to_string()),
        }
    }

    /// RMSE for scalar heads, KL (the validation loss) for PDF heads.
    pub fn metric(&self) -> Option<f64> {
        self.val_rmse.or(self.val_loss)
    }
}

/// Trains one model per candidate with the base seed. Candidate failures are
/// recorded in their row.
pub fn grid_search(series: &[KpiSeries], base: &DeepAutoConfig, candidates: &[GridCandidate]) -> Result<GridReport> {
    if candidates.is_empty() {
        return Err(Error::Config("grid needs at least one candidate".into()));
    }
    let anchor_floor = shared_anchor_floor(base, candidates);
    let rows = candidates
        .iter()
        .map(|c| match run_candidate(series, base, c, anchor_floor).and_then(|run| GridRow::from_run(c, &run)) {
            Ok(row) => row,
            Err(e) => {
                warn!("grid candidate {} failed: {e}", c.label());
                GridRow::failed(c, &e)
            }
        })
        .collect();
    Ok(GridReport {
        base_config: base.clone(),
        anchor_floor,
        rows,
    })
}

impl GridReport {
    /// Row indices ordered by metric, best first; failed rows last.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by(|&a, &b| {
            let ma = self.rows[a].metric().unwrap_or(f64::INFINITY);
            let mb = self.rows[b].metric().unwrap_or(f64::INFINITY);
            ma.total_cmp(&mb).then(a.cmp(&b))
        });
        idx
    }

    pub fn to_text(&self) -> String {
        let metric = match self.base_config.output {
            OutputKind::ScalarHorizons(_) => "val RMSE",
            OutputKind::Pdf(_) => "val KL",
        };
        let mut rank = vec![0; self.rows.len()];
        for (r, i) in self.ranking().into_iter().enumerate() {
            rank[i] = r + 1;
        }
        let mut out = format!("{:<28} {:>12} {:>9} {:>5}\n", "features", metric, "params", "rank");
        for (row, r) in self.rows.iter().zip(rank) {
            match (&row.error, row.metric()) {
                (None, Some(m)) => writeln!(out, "{:<28} {:>12.6} {:>9} {:>5}", row.setting, m, row.n_params.unwrap_or(0), r),
                (err, _) => writeln!(out, "{:<28} {:>12} {:>9} {:>5}  {}", row.setting, "failed", "-", r, err.as_deref().unwrap_or("")),
            }
            .unwrap();
        }
        out
    }
}
