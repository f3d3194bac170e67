//! Regular-interval per-cell multivariate series built from raw records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::{CellRecord, Topic, RSRQ_BINS};
use crate::error::{Error, Result};
use crate::neuralnet::Tensor2;

/// Channel name prefix for RSRQ histogram bins (`rsrq_0` .. `rsrq_34`).
pub const RSRQ_CHANNEL_PREFIX: &str = "rsrq_";

/// Expands configured channel topics into concrete channel names.
///
/// `"rsrq"` expands to one channel per histogram bin; other names map 1:1.
pub fn expand_channels(topics: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for t in topics {
        match Topic::parse(t) {
            Some(Topic::Rsrq) => out.extend((0..RSRQ_BINS).map(|b| format!("{RSRQ_CHANNEL_PREFIX}{b}"))),
            Some(Topic::Load) | Some(Topic::Ue) => out.push(t.clone()),
            _ => return Err(Error::Config(format!("unsupported channel topic {t:?}"))),
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no channels configured".into()));
    }
    Ok(out)
}

pub fn is_histogram_channel(name: &str) -> bool {
    name.starts_with(RSRQ_CHANNEL_PREFIX)
}

/// Channels already expressed as fractions in `[0, 1]`: load and histogram
/// bins, including neighbour copies (`"load@c7"`).
pub fn is_fraction_channel(name: &str) -> bool {
    let base = name.split('@').next().unwrap_or(name);
    base == "load" || is_histogram_channel(base)
}

/// Cell configuration in effect at some instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellConfig {
    pub band_mhz: Option<f64>,
    pub power_dbm: Option<f64>,
    pub bandwidth_mhz: Option<f64>,
}

/// Time-ordered configuration change events for one cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfigTimeline {
    events: Vec<(i64, Topic, f64)>,
}

impl ConfigTimeline {
    pub fn push(&mut self, ts: i64, topic: Topic, value: f64) {
        debug_assert!(topic.is_config());
        let pos = self.events.partition_point(|e| e.0 <= ts);
        self.events.insert(pos, (ts, topic, value));
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Configuration from all events strictly before `ts`.
    pub fn as_of(&self, ts: i64) -> CellConfig {
        let mut cfg = CellConfig::default();
        for &(t, topic, v) in &self.events {
            if t >= ts {
                break;
            }
            match topic {
                Topic::Band => cfg.band_mhz = Some(v),
                Topic::Power => cfg.power_dbm = Some(v),
                Topic::Bandwidth => cfg.bandwidth_mhz = Some(v),
                _ => {}
            }
        }
        cfg
    }

    /// Drops events that no longer affect any instant at or after `ts`.
    pub fn compact_before(&mut self, ts: i64) {
        let current = self.as_of(ts);
        self.events.retain(|e| e.0 >= ts);
        let mut head = Vec::new();
        let base = ts - 1;
        if let Some(v) = current.band_mhz {
            head.push((base, Topic::Band, v));
        }
        if let Some(v) = current.power_dbm {
            head.push((base, Topic::Power, v));
        }
        if let Some(v) = current.bandwidth_mhz {
            head.push((base, Topic::Bandwidth, v));
        }
        head.append(&mut self.events);
        self.events = head;
    }
}

/// Per-cell time series `x_t` at a fixed step with a missing-value mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSeries {
    pub cell_id: String,
    /// Timestamp of row 0, a multiple of `step_seconds`.
    pub start_ts: i64,
    pub step_seconds: i64,
    pub channels: Vec<String>,
    /// `T × C`; entries flagged missing hold NaN.
    pub values: Tensor2,
    /// `T × C`, row-major, `true` where the value is missing.
    pub missing: Vec<bool>,
    pub config: ConfigTimeline,
}

impl KpiSeries {
    /// Builds a fully-observed series from rows.
    pub fn from_rows(cell_id: &str, start_ts: i64, step_seconds: i64, channels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let values = Tensor2::from_rows(rows)?;
        if values.cols() != channels.len() && !rows.is_empty() {
            return Err(Error::InvalidInput("row width differs from channel count".into()));
        }
        let missing = values.as_slice().iter().map(|v| v.is_nan()).collect();
        Ok(Self {
            cell_id: cell_id.to_string(),
            start_ts,
            step_seconds,
            channels,
            values,
            missing,
            config: ConfigTimeline::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn ts_at(&self, t: usize) -> i64 {
        self.start_ts + t as i64 * self.step_seconds
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("cell {}: no channel {name:?}", self.cell_id)))
    }

    pub fn is_missing(&self, t: usize, c: usize) -> bool {
        self.missing[t * self.n_channels() + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.values.get(t, c)).collect()
    }

    pub fn fully_observed(&self) -> bool {
        !self.missing.iter().any(|m| *m)
    }
}

/// Per-bucket RSRQ probability mass functions.
#[derive(Debug, Clone, PartialEq)]
pub struct RsrqHistograms {
    pub bucket_seconds: i64,
    /// Bucket index (`ts / bucket_seconds`) of `rows[0]`.
    pub first_bucket: i64,
    /// One PDF per bucket; `None` for buckets without reports.
    pub rows: Vec<Option<[f64; RSRQ_BINS]>>,
    pub rejected: usize,
}

/// Groups `(ts, rsrq)` reports into per-bucket normalized histograms.
pub fn rsrq_histogram(reports: &[(i64, i64)], bucket_seconds: i64) -> Result<RsrqHistograms> {
    if bucket_seconds <= 0 {
        return Err(Error::Config("bucket_seconds must be positive".into()));
    }
    let mut counts: BTreeMap<i64, [u32; RSRQ_BINS]> = BTreeMap::new();
    let mut rejected = 0;
    for &(ts, v) in reports {
        if !(0..RSRQ_BINS as i64).contains(&v) {
            rejected += 1;
            continue;
        }
        counts.entry(ts.div_euclid(bucket_seconds)).or_insert([0; RSRQ_BINS])[v as usize] += 1;
    }
    let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Ok(RsrqHistograms {
            bucket_seconds,
            first_bucket: 0,
            rows: Vec::new(),
            rejected,
        });
    };
    let rows = (first..=last)
        .map(|b| counts.get(&b).map(normalize_counts))
        .collect();
    Ok(RsrqHistograms {
        bucket_seconds,
        first_bucket: first,
        rows,
        rejected,
    })
}

pub(crate) fn normalize_counts(c: &[u32; RSRQ_BINS]) -> [f64; RSRQ_BINS] {
    let total: u32 = c.iter().sum();
    let mut out = [0.0; RSRQ_BINS];
    for (o, &k) in out.iter_mut().zip(c) {
        *o = k as f64 / total as f64;
    }
    out
}

#[derive(Default)]
struct CellAccum {
    scalar: BTreeMap<(i64, Topic), (f64, u32)>,
    rsrq: BTreeMap<i64, [u32; RSRQ_BINS]>,
    config: ConfigTimeline,
}

/// Correlates records into one series per cell, ordered by cell id.
///
/// Each record lands in bucket `⌊ts / step⌋`; duplicates in a bucket are
/// averaged (scalar topics) or pooled (RSRQ). A cell's series spans from its
/// first to its last bucket holding any channel record.
pub fn build_series(records: &[CellRecord], step_seconds: i64, channel_topics: &[String]) -> Result<Vec<KpiSeries>> {
    if step_seconds <= 0 {
        return Err(Error::Config("step_seconds must be positive".into()));
    }
    let channels = expand_channels(channel_topics)?;
    let topics: Vec<Topic> = channel_topics.iter().filter_map(|t| Topic::parse(t)).collect();
    let mut cells: BTreeMap<&str, CellAccum> = BTreeMap::new();
    for r in records {
        let acc = cells.entry(r.cell.as_str()).or_default();
        let bucket = r.ts.div_euclid(step_seconds);
        if r.topic.is_config() {
            acc.config.push(r.ts, r.topic, r.value);
        } else if !topics.contains(&r.topic) {
            continue;
        } else if r.topic == Topic::Rsrq {
            let v = r.value as i64;
            if (0..RSRQ_BINS as i64).contains(&v) {
                acc.rsrq.entry(bucket).or_insert([0; RSRQ_BINS])[v as usize] += 1;
            }
        } else {
            let e = acc.scalar.entry((bucket, r.topic)).or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
    }

    let mut out = Vec::new();
    for (cell, acc) in cells {
        let buckets = acc.scalar.keys().map(|k| k.0).chain(acc.rsrq.keys().copied());
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for b in buckets {
            lo = lo.min(b);
            hi = hi.max(b);
        }
        if lo > hi {
            continue;
        }
        let len = (hi - lo + 1) as usize;
        let nc = channels.len();
        let mut values = Tensor2::zeros(len, nc);
        values.fill(f64::NAN);
        let mut col = 0;
        for topic in &topics {
            if *topic == Topic::Rsrq {
                for (b, counts) in &acc.rsrq {
                    let row = (b - lo) as usize;
                    let pdf = normalize_counts(counts);
                    values.row_mut(row)[col..col + RSRQ_BINS].copy_from_slice(&pdf);
                }
                col += RSRQ_BINS;
            } else {
                for ((b, t), (sum, n)) in &acc.scalar {
                    if t == topic {
                        values.set((b - lo) as usize, col, sum / *n as f64);
                    }
                }
                col += 1;
            }
        }
        let missing = values.as_slice().iter().map(|v| v.is_nan()).collect();
        out.push(KpiSeries {
            cell_id: cell.to_string(),
            start_ts: lo * step_seconds,
            step_seconds,
            channels: channels.clone(),
            values,
            missing,
            config: acc.config,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_report_is_one_hot() {
        let h = rsrq_histogram(&[(10, 10)], 300).unwrap();
        let row = h.rows[0].unwrap();
        assert_eq!(row[10], 1.0);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn extreme_bins_split_evenly() {
        let h = rsrq_histogram(&[(0, 0), (1, 0), (2, 34), (3, 34)], 300).unwrap();
        let row = h.rows[0].unwrap();
        assert_eq!(row[0], 0.5);
        assert_eq!(row[34], 0.5);
    }

    #[test]
    fn uniform_reports_fill_bins_evenly() {
        // 300 reports cycling over 0..34: bins get 8 or 9 reports each.
        let reports: Vec<(i64, i64)> = (0..300).map(|k| (k, k % 35)).collect();
        let h = rsrq_histogram(&reports, 300).unwrap();
        let row = h.rows[0].unwrap();
        for (b, p) in row.iter().enumerate() {
            let want = if b < 300 % 35 { 9.0 / 300.0 } else { 8.0 / 300.0 };
            assert!((p - want).abs() < 1e-15);
            assert!((p - 1.0 / 35.0).abs() < 0.01);
        }
    }

    #[test]
    fn out_of_range_rejected_and_gaps_missing() {
        let h = rsrq_histogram(&[(0, 3), (5, 40), (900, 4)], 300).unwrap();
        assert_eq!(h.rejected, 1);
        assert_eq!(h.rows.len(), 4);
        assert!(h.rows[1].is_none() && h.rows[2].is_none());
    }

    #[test]
    fn build_series_averages_duplicates_and_masks_gaps() {
        let recs = vec![
            CellRecord::new(Topic::Load, "a", 0, 0.4),
            CellRecord::new(Topic::Load, "a", 30, 0.6),
            CellRecord::new(Topic::Ue, "a", 10, 7.0),
            CellRecord::new(Topic::Load, "a", 120, 0.2),
            CellRecord::new(Topic::Band, "a", 0, 700.0),
        ];
        let s = build_series(&recs, 60, &["load".into(), "ue".into()]).unwrap();
        assert_eq!(s.len(), 1);
        let s = &s[0];
        assert_eq!(s.len(), 3);
        assert!((s.values.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(s.values.get(0, 1), 7.0);
        assert!(s.is_missing(1, 0) && s.is_missing(1, 1) && s.is_missing(2, 1));
        assert_eq!(s.config.as_of(1).band_mhz, Some(700.0));
        assert_eq!(s.config.as_of(0).band_mhz, None);
    }

    #[test]
    fn channel_expansion() {
        let c = expand_channels(&["load".into(), "rsrq".into()]).unwrap();
        assert_eq!(c.len(), 1 + RSRQ_BINS);
        assert_eq!(c[1], "rsrq_0");
        assert!(expand_channels(&["band".into()]).is_err());
    }

    #[test]
    fn compacted_timeline_keeps_current_config() {
        let mut tl = ConfigTimeline::default();
        tl.push(0, Topic::Band, 700.0);
        tl.push(50, Topic::Band, 1900.0);
        tl.push(200, Topic::Power, 43.0);
        tl.compact_before(100);
        assert_eq!(tl.as_of(100).band_mhz, Some(1900.0));
        assert_eq!(tl.as_of(201).power_dbm, Some(43.0));
    }
}
