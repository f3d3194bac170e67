//! Per-cell bucketing of live records into the same rows `build_series` makes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dataprep::{
    expand_channels, interpolate_missing, normalize_counts, CellRecord, ConfigTimeline, KpiSeries, Topic, RSRQ_BINS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readiness {
    /// Fewer closed buckets than the model window needs.
    Warming,
    Ready,
}

/// Column layout shared by every buffer built for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLayout {
    pub step_seconds: i64,
    pub channels: Vec<String>,
    /// `(topic, first column)` in column order.
    slots: Vec<(Topic, usize)>,
}

impl ChannelLayout {
    pub fn new(step_seconds: i64, topics: &[String]) -> Result<Self> {
        if step_seconds <= 0 {
            return Err(Error::Config("step_seconds must be positive".into()));
        }
        let channels = expand_channels(topics)?;
        let mut slots = Vec::new();
        let mut col = 0;
        for t in topics {
            let topic = Topic::parse(t).ok_or_else(|| Error::Config(format!("unknown topic {t:?}")))?;
            slots.push((topic, col));
            col += if topic == Topic::Rsrq { RSRQ_BINS } else { 1 };
        }
        Ok(Self {
            step_seconds,
            channels,
            slots,
        })
    }

    pub fn width(&self) -> usize {
        self.channels.len()
    }

    fn slot(&self, topic: Topic) -> Option<usize> {
        self.slots.iter().position(|s| s.0 == topic)
    }
}

#[derive(Debug, Clone)]
struct OpenBucket {
    index: i64,
    /// Sum and count per slot, in arrival order so averages match batch mode.
    sums: Vec<(f64, u32)>,
    rsrq: [u32; RSRQ_BINS],
}

/// What happened to one pushed record.
#[derive(Debug, Clone, PartialEq)]
pub enum PushOutcome {
    /// Added to the open bucket; `closed` is the bucket this record closed.
    Accepted { closed: Option<i64> },
    /// Configuration event, stored in the timeline.
    Config,
    /// Bucket already closed; state unchanged.
    Late,
    /// Topic not among the model's channels.
    Ignored,
}

/// Rolling raw history of one cell. Rows are bucket averages with `NaN` for
/// missing values; the newest row is the last closed bucket.
#[derive(Debug, Clone)]
pub struct CellBuffer {
    pub cell_id: String,
    /// Model version whose layout this buffer follows.
    pub layout_version: u64,
    capacity: usize,
    rows: VecDeque<Vec<f64>>,
    open: Option<OpenBucket>,
    last_closed: Option<i64>,
    config: ConfigTimeline,
    pub last_event_ts: i64,
}

impl CellBuffer {
    /// `capacity` rows are retained; it must cover the model window.
    pub fn new(cell_id: &str, layout_version: u64, capacity: usize) -> Self {
        Self {
            cell_id: cell_id.to_string(),
            layout_version,
            capacity: capacity.max(1),
            rows: VecDeque::with_capacity(capacity.max(1)),
            open: None,
            last_closed: None,
            config: ConfigTimeline::default(),
            last_event_ts: i64::MIN,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn last_closed(&self) -> Option<i64> {
        self.last_closed
    }

    pub fn open_bucket(&self) -> Option<i64> {
        self.open.as_ref().map(|o| o.index)
    }

    pub fn readiness(&self, need: usize) -> Readiness {
        if self.rows.len() >= need {
            Readiness::Ready
        } else {
            Readiness::Warming
        }
    }

    pub fn push(&mut self, rec: &CellRecord, layout: &ChannelLayout) -> PushOutcome {
        self.last_event_ts = self.last_event_ts.max(rec.ts);
        if rec.topic.is_config() {
            self.config.push(rec.ts, rec.topic, rec.value);
            return PushOutcome::Config;
        }
        let Some(slot) = layout.slot(rec.topic) else {
            return PushOutcome::Ignored;
        };
        let bucket = rec.ts.div_euclid(layout.step_seconds);
        if self.last_closed.is_some_and(|c| bucket <= c) {
            return PushOutcome::Late;
        }
        let mut closed = None;
        match &self.open {
            Some(o) if o.index == bucket => {}
            Some(o) if o.index > bucket => return PushOutcome::Late,
            Some(_) => {
                closed = self.close_open(layout);
                self.fill_gap_to(bucket, layout);
                self.open = Some(Self::fresh(bucket, layout));
            }
            None => {
                self.fill_gap_to(bucket, layout);
                self.open = Some(Self::fresh(bucket, layout));
            }
        }
        let open = self.open.as_mut().expect("opened above");
        if rec.topic == Topic::Rsrq {
            open.rsrq[rec.value as usize] += 1;
        } else {
            let e = &mut open.sums[slot];
            e.0 += rec.value;
            e.1 += 1;
        }
        PushOutcome::Accepted { closed }
    }

    /// Closes the open bucket if it started at least two steps before
    /// `event_ts`. Returns the closed bucket.
    pub fn close_by_watermark(&mut self, event_ts: i64, layout: &ChannelLayout) -> Option<i64> {
        let idx = self.open.as_ref()?.index;
        if (idx + 2) * layout.step_seconds <= event_ts {
            self.close_open(layout)
        } else {
            None
        }
    }

    /// Closes the open bucket unconditionally (end of stream).
    pub fn flush(&mut self, layout: &ChannelLayout) -> Option<i64> {
        self.close_open(layout)
    }

    fn fresh(index: i64, layout: &ChannelLayout) -> OpenBucket {
        OpenBucket {
            index,
            sums: vec![(0.0, 0); layout.slots.len()],
            rsrq: [0; RSRQ_BINS],
        }
    }

    fn close_open(&mut self, layout: &ChannelLayout) -> Option<i64> {
        let o = self.open.take()?;
        let mut row = vec![f64::NAN; layout.width()];
        for (k, &(topic, col)) in layout.slots.iter().enumerate() {
            if topic == Topic::Rsrq {
                if o.rsrq.iter().any(|&c| c > 0) {
                    row[col..col + RSRQ_BINS].copy_from_slice(&normalize_counts(&o.rsrq));
                }
            } else if o.sums[k].1 > 0 {
                row[col] = o.sums[k].0 / o.sums[k].1 as f64;
            }
        }
        self.push_row(row);
        self.last_closed = Some(o.index);
        Some(o.index)
    }

    /// Appends all-missing rows for buckets skipped before `bucket`.
    fn fill_gap_to(&mut self, bucket: i64, layout: &ChannelLayout) {
        let Some(last) = self.last_closed else {
            return;
        };
        let gap = (bucket - last - 1).max(0);
        // Beyond `capacity` the gap rows would all be evicted anyway.
        for _ in 0..gap.min(self.capacity as i64) {
            self.push_row(vec![f64::NAN; layout.width()]);
        }
        self.last_closed = Some(bucket - 1);
    }

    fn push_row(&mut self, row: Vec<f64>) {
        if self.rows.len() == self.capacity {
            self.rows.pop_front();
        }
        self.rows.push_back(row);
    }

    /// The retained rows as an interpolated raw series ending at the last
    /// closed bucket; `None` while fewer than `need` rows are held.
    pub fn window_series(&mut self, need: usize, layout: &ChannelLayout) -> Result<Option<KpiSeries>> {
        let Some(last) = self.last_closed else {
            return Ok(None);
        };
        if self.rows.len() < need.max(1) {
            return Ok(None);
        }
        let start_bucket = last + 1 - self.rows.len() as i64;
        let start_ts = start_bucket * layout.step_seconds;
        self.config.compact_before(start_ts);
        let rows: Vec<Vec<f64>> = self.rows.iter().cloned().collect();
        let mut s = KpiSeries::from_rows(&self.cell_id, start_ts, layout.step_seconds, layout.channels.clone(), &rows)?;
        s.config = self.config.clone();
        let s = if s.fully_observed() { s } else { interpolate_missing(&s)? };
        Ok(Some(s))
    }
}
