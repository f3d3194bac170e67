//! Sharded ingestion, prediction on bucket close and atomic model swaps.
//!
//! Lock order: shard, then model (read), then latest-prediction map. Reloads
//! take only the model lock, so a prediction always sees one model snapshot.

use std::collections::{HashMap, VecDeque};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering::Relaxed};
use std::sync::{mpsc, Arc, Mutex, MutexGuard, RwLock};
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::buffer::{CellBuffer, ChannelLayout, PushOutcome, Readiness};
use super::PredictionRecord;
use crate::dataprep::{parse_line, CellRecord, ParsedLine};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub shards: usize,
    /// Cells silent for this long in event time are evicted.
    pub idle_ttl_seconds: i64,
    /// Latency samples kept for the health percentiles.
    pub latency_samples: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            shards: 16,
            idle_ttl_seconds: 24 * 3600,
            latency_samples: 100_000,
        }
    }
}

/// An immutable model snapshot as seen by inference.
#[derive(Debug)]
pub struct LoadedModel {
    pub model: Model,
    pub version: u64,
    pub layout: ChannelLayout,
    /// Changes only when the buffer shape changes; buffers built under an
    /// older layout are reset on their next record.
    pub layout_version: u64,
    /// Closed buckets required before the first prediction.
    pub need: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    /// `ok` or `no_model`.
    pub status: String,
    pub model_version: Option<u64>,
    /// Records that parsed and passed range checks, late ones included.
    pub ingested: u64,
    pub malformed: u64,
    pub out_of_range: u64,
    pub late: u64,
    /// Valid records on topics the model does not read.
    pub ignored: u64,
    /// Records received while no model was loaded.
    pub no_model: u64,
    /// `malformed + out_of_range + late + no_model`.
    pub dropped: u64,
    pub predictions: u64,
    pub predict_errors: u64,
    pub reload_failures: u64,
    pub evicted: u64,
    pub cells: usize,
    pub cells_ready: usize,
    pub latency_p50_ms: Option<f64>,
    pub latency_p99_ms: Option<f64>,
}

#[derive(Default)]
struct Counters {
    ingested: AtomicU64,
    malformed: AtomicU64,
    out_of_range: AtomicU64,
    late: AtomicU64,
    ignored: AtomicU64,
    no_model: AtomicU64,
    predictions: AtomicU64,
    predict_errors: AtomicU64,
    reload_failures: AtomicU64,
    evicted: AtomicU64,
}

type Shard = HashMap<String, CellBuffer>;

pub struct Engine {
    opts: EngineOptions,
    model: RwLock<Option<Arc<LoadedModel>>>,
    model_path: Mutex<Option<PathBuf>>,
    versions: AtomicU64,
    shards: Vec<Mutex<Shard>>,
    latest: RwLock<HashMap<String, Arc<PredictionRecord>>>,
    counters: Counters,
    /// Largest event bucket seen on any data topic.
    max_bucket: AtomicI64,
    max_event_ts: AtomicI64,
    started: Instant,
    /// Nanoseconds after `started` of the last data record.
    last_record_nanos: AtomicU64,
    latencies: Mutex<VecDeque<f64>>,
    subscribers: Mutex<Vec<mpsc::Sender<Arc<str>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// Nearest-rank percentile of an unsorted sample; `p` is a fraction in [0, 1].
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

impl Engine {
    pub fn new(opts: EngineOptions) -> Self {
        let shards = (0..opts.shards.max(1)).map(|_| Mutex::new(Shard::new())).collect();
        Self {
            opts,
            model: RwLock::new(None),
            model_path: Mutex::new(None),
            versions: AtomicU64::new(0),
            shards,
            latest: RwLock::new(HashMap::new()),
            counters: Counters::default(),
            max_bucket: AtomicI64::new(i64::MIN),
            max_event_ts: AtomicI64::new(i64::MIN),
            started: Instant::now(),
            last_record_nanos: AtomicU64::new(0),
            latencies: Mutex::new(VecDeque::new()),
            subscribers: Mutex::new(Vec::new()),
        }
    }

    pub fn with_model(model: Model, opts: EngineOptions) -> Result<Self> {
        let e = Self::new(opts);
        e.load_model(model)?;
        Ok(e)
    }

    pub fn model(&self) -> Option<Arc<LoadedModel>> {
        self.model.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Installs `model` as the serving snapshot and returns its version.
    pub fn load_model(&self, model: Model) -> Result<u64> {
        if model.config.neighbors > 0 {
            return Err(Error::Config("streaming inference does not support neighbour features".into()));
        }
        model.config.validate()?;
        let layout = ChannelLayout::new(model.config.step_seconds, &model.config.channels)?;
        let need = model.config.window.first_anchor().max(1);
        let mut slot = self.model.write().unwrap_or_else(|e| e.into_inner());
        let version = self.versions.fetch_add(1, Relaxed) + 1;
        let layout_version = match slot.as_deref() {
            Some(old) if old.layout == layout && old.need == need => old.layout_version,
            _ => version,
        };
        *slot = Some(Arc::new(LoadedModel {
            model,
            version,
            layout,
            layout_version,
            need,
        }));
        info!("model version {version} loaded");
        Ok(version)
    }

    /// Loads `path` and swaps it in; on any error the current model keeps
    /// serving.
    pub fn reload_from(&self, path: &Path) -> Result<u64> {
        let loaded = Model::load(path).and_then(|m| self.load_model(m));
        match loaded {
            Ok(v) => {
                *lock(&self.model_path) = Some(path.to_path_buf());
                Ok(v)
            }
            Err(e) => {
                self.counters.reload_failures.fetch_add(1, Relaxed);
                warn!("reload from {} failed, keeping current model: {e}", path.display());
                Err(e)
            }
        }
    }

    /// Reloads from the last successfully loaded path.
    pub fn reload(&self) -> Result<u64> {
        let path = lock(&self.model_path).clone().ok_or(Error::NoModel)?;
        self.reload_from(&path)
    }

    pub fn set_model_path(&self, path: &Path) {
        *lock(&self.model_path) = Some(path.to_path_buf());
    }

    fn shard_of(&self, cell: &str) -> &Mutex<Shard> {
        let mut h = DefaultHasher::new();
        cell.hash(&mut h);
        &self.shards[(h.finish() % self.shards.len() as u64) as usize]
    }

    /// Parses and ingests one NDJSON line.
    pub fn ingest_line(&self, line: &str, received: Instant) -> Vec<Arc<PredictionRecord>> {
        match parse_line(line) {
            ParsedLine::Record(r) => self.ingest_valid(&r, received),
            ParsedLine::Blank => Vec::new(),
            ParsedLine::Malformed => {
                self.counters.malformed.fetch_add(1, Relaxed);
                Vec::new()
            }
            ParsedLine::OutOfRange => {
                self.counters.out_of_range.fetch_add(1, Relaxed);
                Vec::new()
            }
        }
    }

    /// Ingests one record; returns the predictions it triggered, including
    /// watermark closes on other cells.
    pub fn ingest_record(&self, rec: &CellRecord, received: Instant) -> Vec<Arc<PredictionRecord>> {
        if rec.validate().is_err() {
            self.counters.out_of_range.fetch_add(1, Relaxed);
            return Vec::new();
        }
        self.ingest_valid(rec, received)
    }

    fn ingest_valid(&self, rec: &CellRecord, received: Instant) -> Vec<Arc<PredictionRecord>> {
        self.counters.ingested.fetch_add(1, Relaxed);
        let mut published = Vec::new();
        let step;
        {
            let mut shard = lock(self.shard_of(&rec.cell));
            let Some(m) = self.model() else {
                self.counters.no_model.fetch_add(1, Relaxed);
                return published;
            };
            step = m.layout.step_seconds;
            let buf = shard
                .entry(rec.cell.clone())
                .or_insert_with(|| CellBuffer::new(&rec.cell, m.layout_version, m.need));
            if buf.layout_version != m.layout_version {
                debug!("cell {}: buffer reset for new model layout", rec.cell);
                *buf = CellBuffer::new(&rec.cell, m.layout_version, m.need);
            }
            match buf.push(rec, &m.layout) {
                PushOutcome::Accepted { closed: Some(_) } => published.extend(self.predict_and_publish(buf, &m, received)),
                PushOutcome::Accepted { closed: None } | PushOutcome::Config => {}
                PushOutcome::Late => {
                    self.counters.late.fetch_add(1, Relaxed);
                }
                PushOutcome::Ignored => {
                    self.counters.ignored.fetch_add(1, Relaxed);
                }
            }
        }
        if rec.topic.is_config() {
            return published;
        }
        let nanos = self.started.elapsed().as_nanos() as u64;
        self.last_record_nanos.fetch_max(nanos, Relaxed);
        self.max_event_ts.fetch_max(rec.ts, Relaxed);
        let bucket = rec.ts.div_euclid(step);
        let prev = self.max_bucket.fetch_max(bucket, Relaxed);
        if bucket > prev && prev != i64::MIN {
            published.extend(self.advance_to(rec.ts, received));
        }
        published
    }

    /// Closes every open bucket that started at least two steps before
    /// `event_ts`, and evicts cells idle past the TTL.
    pub fn advance_to(&self, event_ts: i64, received: Instant) -> Vec<Arc<PredictionRecord>> {
        let mut published = Vec::new();
        let mut evicted = Vec::new();
        for shard in &self.shards {
            let mut shard = lock(shard);
            let Some(m) = self.model() else {
                return published;
            };
            shard.retain(|cell, buf| {
                let keep = buf.last_event_ts >= event_ts.saturating_sub(self.opts.idle_ttl_seconds);
                if !keep {
                    evicted.push(cell.clone());
                }
                keep
            });
            for buf in shard.values_mut() {
                if buf.layout_version == m.layout_version && buf.close_by_watermark(event_ts, &m.layout).is_some() {
                    published.extend(self.predict_and_publish(buf, &m, received));
                }
            }
        }
        if !evicted.is_empty() {
            self.counters.evicted.fetch_add(evicted.len() as u64, Relaxed);
            let mut latest = self.latest.write().unwrap_or_else(|e| e.into_inner());
            for c in &evicted {
                latest.remove(c);
            }
            info!("evicted {} idle cells", evicted.len());
        }
        published
    }

    /// Wall-clock watermark for a paced stream: once input has been idle,
    /// event time is extrapolated at `speedup` and open buckets are closed.
    /// An unpaced stream (infinite speedup) has no wall-clock relation to
    /// event time, so only records and end of input advance it.
    pub fn tick(&self, now: Instant, speedup: f64) -> Vec<Arc<PredictionRecord>> {
        let last = self.max_event_ts.load(Relaxed);
        if last == i64::MIN || !(speedup > 0.0) || speedup.is_infinite() {
            return Vec::new();
        }
        let since = self.started + std::time::Duration::from_nanos(self.last_record_nanos.load(Relaxed));
        let idle = now.saturating_duration_since(since).as_secs_f64();
        let virtual_ts = last.saturating_add((idle * speedup).min(1e15) as i64);
        self.advance_to(virtual_ts, now)
    }

    /// Closes every open bucket (end of input).
    pub fn flush(&self, received: Instant) -> Vec<Arc<PredictionRecord>> {
        let mut published = Vec::new();
        for shard in &self.shards {
            let mut shard = lock(shard);
            let Some(m) = self.model() else {
                return published;
            };
            let mut cells: Vec<&mut CellBuffer> = shard.values_mut().collect();
            cells.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
            for buf in cells {
                if buf.layout_version == m.layout_version && buf.flush(&m.layout).is_some() {
                    published.extend(self.predict_and_publish(buf, &m, received));
                }
            }
        }
        published
    }

    fn predict_and_publish(&self, buf: &mut CellBuffer, m: &LoadedModel, received: Instant) -> Option<Arc<PredictionRecord>> {
        let outputs = (|| {
            let Some(series) = buf.window_series(m.need, &m.layout)? else {
                return Ok(None);
            };
            let scaled = m.model.scaler.apply_series(&series)?;
            let t = scaled.len();
            let out = m.model.predict_at(&scaled, t)?;
            Ok::<_, Error>(Some((scaled.ts_at(0) + t as i64 * scaled.step_seconds, out)))
        })();
        let (anchor_ts, out) = match outputs {
            Ok(Some(v)) => v,
            Ok(None) => return None,
            Err(e) => {
                self.counters.predict_errors.fetch_add(1, Relaxed);
                debug!("cell {}: prediction failed: {e}", buf.cell_id);
                return None;
            }
        };
        let latency_ms = received.elapsed().as_secs_f64() * 1e3;
        let rec = Arc::new(PredictionRecord::new(
            &buf.cell_id,
            anchor_ts,
            &m.model.config.output,
            out,
            m.version,
            latency_ms,
        ));
        self.counters.predictions.fetch_add(1, Relaxed);
        {
            let mut lat = lock(&self.latencies);
            if lat.len() == self.opts.latency_samples.max(1) {
                lat.pop_front();
            }
            lat.push_back(latency_ms);
        }
        self.latest
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(buf.cell_id.clone(), rec.clone());
        let mut subs = lock(&self.subscribers);
        if !subs.is_empty() {
            let line: Arc<str> = Arc::from(rec.to_json_line());
            subs.retain(|s| s.send(line.clone()).is_ok());
        }
        Some(rec)
    }

    /// Latest prediction for `cell`.
    pub fn latest(&self, cell: &str) -> Option<Arc<PredictionRecord>> {
        self.latest.read().unwrap_or_else(|e| e.into_inner()).get(cell).cloned()
    }

    /// `None` for cells with no buffer.
    pub fn readiness(&self, cell: &str) -> Option<Readiness> {
        let need = self.model()?.need;
        lock(self.shard_of(cell)).get(cell).map(|b| b.readiness(need))
    }

    /// NDJSON lines of every prediction published after this call.
    pub fn subscribe(&self) -> mpsc::Receiver<Arc<str>> {
        let (tx, rx) = mpsc::channel();
        lock(&self.subscribers).push(tx);
        rx
    }

    pub fn latencies_ms(&self) -> Vec<f64> {
        lock(&self.latencies).iter().copied().collect()
    }

    pub fn health(&self) -> Health {
        let m = self.model();
        let need = m.as_ref().map_or(usize::MAX, |m| m.need);
        let (mut cells, mut ready) = (0, 0);
        for shard in &self.shards {
            let shard = lock(shard);
            cells += shard.len();
            ready += shard.values().filter(|b| b.readiness(need) == Readiness::Ready).count();
        }
        let lat = self.latencies_ms();
        let c = &self.counters;
        let get = |a: &AtomicU64| a.load(Relaxed);
        Health {
            status: if m.is_some() { "ok" } else { "no_model" }.to_string(),
            model_version: m.map(|m| m.version),
            ingested: get(&c.ingested),
            malformed: get(&c.malformed),
            out_of_range: get(&c.out_of_range),
            late: get(&c.late),
            ignored: get(&c.ignored),
            no_model: get(&c.no_model),
            dropped: get(&c.malformed) + get(&c.out_of_range) + get(&c.late) + get(&c.no_model),
            predictions: get(&c.predictions),
            predict_errors: get(&c.predict_errors),
            reload_failures: get(&c.reload_failures),
            evicted: get(&c.evicted),
            cells,
            cells_ready: ready,
            latency_p50_ms: percentile(&lat, 0.50),
            latency_p99_ms: percentile(&lat, 0.99),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), Some(50.0));
        assert_eq!(percentile(&v, 0.99), Some(99.0));
        assert_eq!(percentile(&[3.0], 0.99), Some(3.0));
        assert_eq!(percentile(&[], 0.5), None);
    }
}
