//! Live path: NDJSON records in, per-cell predictions out.

mod buffer;
mod engine;
mod server;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use buffer::{CellBuffer, ChannelLayout, PushOutcome, Readiness};
pub use engine::{percentile, Engine, EngineOptions, Health, LoadedModel};
pub use server::{http_get, http_request, ingest_reader, replay_reader, serve, spawn_firehose, spawn_ingest_tcp, spawn_watermark_timer, HttpServer, ServeOptions};

use crate::dataprep::OutputKind;

/// One published forecast. Scalar heads serialize as flat `h{n}` fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub cell_id: String,
    /// First future instant covered by the forecast, UTC epoch seconds.
    pub anchor_ts: i64,
    #[serde(flatten)]
    pub horizons: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdf: Option<Vec<f64>>,
    pub model_version: u64,
    pub ingest_to_predict_latency_ms: f64,
}

impl PredictionRecord {
    pub fn new(cell_id: &str, anchor_ts: i64, output: &OutputKind, values: Vec<f64>, model_version: u64, latency_ms: f64) -> Self {
        let (horizons, pdf) = match output {
            OutputKind::ScalarHorizons(hs) => (hs.iter().zip(&values).map(|(h, v)| (format!("h{h}"), *v)).collect(), None),
            OutputKind::Pdf(_) => (BTreeMap::new(), Some(values)),
        };
        Self {
            cell_id: cell_id.to_string(),
            anchor_ts,
            horizons,
            pdf,
            model_version,
            ingest_to_predict_latency_ms: latency_ms.max(0.0),
        }
    }

    pub fn horizon(&self, h: usize) -> Option<f64> {
        self.horizons.get(&format!("h{h}")).copied()
    }

    /// Outputs in model order: horizons as configured, or the PDF.
    pub fn values(&self, output: &OutputKind) -> Vec<f64> {
        match output {
            OutputKind::ScalarHorizons(hs) => hs.iter().filter_map(|h| self.horizon(*h)).collect(),
            OutputKind::Pdf(_) => self.pdf.clone().unwrap_or_default(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("prediction serializes")
    }
}
