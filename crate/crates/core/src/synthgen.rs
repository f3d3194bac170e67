//! Deterministic synthetic cell KPIs: daily and weekly structure, correlated
//! clusters, configuration shocks, missing values and RSRQ report streams.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataprep::{day_of_week, CellRecord, Topic, RSRQ_BINS};
use crate::error::{Error, Result};
use crate::neuralnet::ParamRng;

/// 2024-01-01 00:00 UTC, a Monday.
pub const DEFAULT_START_TS: i64 = 1_704_067_200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsrqSynth {
    /// Reports per cell per 5 minutes; 0 disables the RSRQ topic.
    pub reports_per_5min: usize,
    /// Peak-to-peak daily swing of the distribution mode, in bins.
    pub daily_drift_bins: f64,
    /// Standard deviation of the mode's random walk per hour, in bins.
    pub walk_bins_per_hour: f64,
    /// Spread of the report distribution, in bins.
    pub width_bins: f64,
}

impl Default for RsrqSynth {
    fn default() -> Self {
        Self {
            reports_per_5min: 0,
            daily_drift_bins: 8.0,
            walk_bins_per_hour: 0.3,
            width_bins: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_cells: usize,
    pub days: usize,
    pub step_seconds: i64,
    pub start_ts: i64,
    /// Amplitude of the daily sinusoid.
    pub daily_amp: f64,
    /// Scale of the weekday commute bumps and weekend dip.
    pub weekly_amp: f64,
    pub noise_sigma: f64,
    pub missing_rate: f64,
    pub n_clusters: usize,
    /// Probability of a configuration change per cell-day.
    pub event_rate: f64,
    /// UE count per unit of load.
    pub ue_per_load: f64,
    pub rsrq: RsrqSynth,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_cells: 50,
            days: 28,
            step_seconds: 900,
            start_ts: DEFAULT_START_TS,
            daily_amp: 0.12,
            weekly_amp: 0.2,
            noise_sigma: 0.03,
            missing_rate: 0.01,
            n_clusters: 4,
            event_rate: 0.03,
            ue_per_load: 200.0,
            rsrq: RsrqSynth::default(),
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Channel-quality preset: 5-minute steps with RSRQ reports.
    pub fn channel_quality() -> Self {
        Self {
            n_cells: 20,
            days: 7,
            step_seconds: 300,
            rsrq: RsrqSynth {
                reports_per_5min: 30,
                ..RsrqSynth::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.missing_rate) || !prob(self.event_rate) {
            return Err(Error::Config("missing_rate and event_rate must lie in [0, 1]".into()));
        }
        if self.n_cells == 0 || self.days == 0 || self.n_clusters == 0 || self.step_seconds <= 0 {
            return Err(Error::Config("n_cells, days, n_clusters and step_seconds must be positive".into()));
        }
        if 86_400 % self.step_seconds != 0 {
            return Err(Error::Config("step_seconds must divide one day".into()));
        }
        for (name, v) in [
            ("daily_amp", self.daily_amp),
            ("weekly_amp", self.weekly_amp),
            ("noise_sigma", self.noise_sigma),
            ("ue_per_load", self.ue_per_load),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        // Deterministic part ranges over roughly base ± (daily + weekly); keep
        // the swing within the unit interval so clipping stays occasional.
        if self.daily_amp + self.weekly_amp > 0.5 {
            return Err(Error::Config(format!(
                "daily_amp + weekly_amp = {} leaves no room inside [0, 1]",
                self.daily_amp + self.weekly_amp
            )));
        }
        if self.rsrq.reports_per_5min > 0 && !(self.rsrq.width_bins > 0.0) {
            return Err(Error::Config("rsrq.width_bins must be > 0".into()));
        }
        Ok(())
    }
}

/// Commute-bump shape centred at `centre_h` (hours), width about 40 minutes.
fn bump(hour: f64, centre_h: f64) -> f64 {
    let mut d = (hour - centre_h).rem_euclid(24.0);
    if d > 12.0 {
        d -= 24.0;
    }
    (-0.5 * (d / 0.7).powi(2)).exp()
}

struct Cluster {
    base: f64,
    phase: f64,
    morning_h: f64,
    evening_h: f64,
}

struct Cell {
    id: String,
    cluster: usize,
    base: f64,
    amp: f64,
    /// A cell-specific daily hotspot hour.
    local_h: f64,
    bandwidth: f64,
    band: f64,
    power: f64,
    shock: f64,
    ar: f64,
    rsrq_mode: f64,
    rsrq_walk: f64,
}

const BANDS: [f64; 3] = [800.0, 1800.0, 2600.0];

/// Generates a time-ordered record stream. Within one timestamp records are
/// ordered by cell, then topic.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<CellRecord>> {
    cfg.validate()?;
    let mut rng = ParamRng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    let clusters: Vec<Cluster> = (0..cfg.n_clusters)
        .map(|k| Cluster {
            base: rng.random_range(0.3..0.45),
            phase: TAU * k as f64 / cfg.n_clusters as f64,
            morning_h: 7.0 + 3.0 * rng.random::<f64>(),
            evening_h: 16.5 + 3.0 * rng.random::<f64>(),
        })
        .collect();
    let width = (cfg.n_cells.max(1) as f64).log10().ceil().max(3.0) as usize;
    let mut cells: Vec<Cell> = (0..cfg.n_cells)
        .map(|i| {
            let cluster = i % cfg.n_clusters;
            Cell {
                id: format!("cell{i:0width$}"),
                cluster,
                base: clusters[cluster].base + 0.03 * unit.sample(&mut rng),
                amp: rng.random_range(0.8..1.2),
                local_h: 24.0 * rng.random::<f64>(),
                bandwidth: if rng.random::<bool>() { 10.0 } else { 20.0 },
                band: BANDS[rng.random_range(0..BANDS.len())],
                power: rng.random_range(40.0..46.0_f64).round(),
                shock: 0.0,
                ar: 0.0,
                rsrq_mode: rng.random_range(14.0..24.0),
                rsrq_walk: 0.0,
            }
        })
        .collect();

    let steps_per_day = (86_400 / cfg.step_seconds) as usize;
    let n_steps = cfg.days * steps_per_day;
    let p_event = 1.0 - (1.0 - cfg.event_rate).powf(1.0 / steps_per_day as f64);
    let ar_coef: f64 = 0.8;
    let ar_innov = cfg.noise_sigma * 0.6 * (1.0 - ar_coef * ar_coef).sqrt();
    let iid_sigma = cfg.noise_sigma * 0.8;
    let rsrq_per_step = cfg.rsrq.reports_per_5min as f64 * cfg.step_seconds as f64 / 300.0;
    let walk_sigma = cfg.rsrq.walk_bins_per_hour * (cfg.step_seconds as f64 / 3600.0).sqrt();

    let mut out = Vec::new();
    for c in &cells {
        for (topic, v) in [(Topic::Band, c.band), (Topic::Power, c.power), (Topic::Bandwidth, c.bandwidth)] {
            out.push(CellRecord::new(topic, c.id.clone(), cfg.start_ts, v));
        }
    }

    for step in 0..n_steps {
        let ts = cfg.start_ts + step as i64 * cfg.step_seconds;
        let sec_of_day = ts.rem_euclid(86_400) as f64;
        let hour = sec_of_day / 3600.0;
        let weekend = day_of_week(ts) >= 5;
        let mut rsrq_batch: Vec<CellRecord> = Vec::new();
        for c in cells.iter_mut() {
            // Configuration change: bandwidth flips, load responds inversely.
            if step > 0 && rng.random::<f64>() < p_event {
                c.bandwidth = if c.bandwidth == 10.0 { 20.0 } else { 10.0 };
                c.shock = if c.bandwidth == 10.0 { 0.08 } else { -0.04 };
                c.power = (c.power + if rng.random::<bool>() { 1.0 } else { -1.0 }).clamp(38.0, 48.0);
                out.push(CellRecord::new(Topic::Bandwidth, c.id.clone(), ts, c.bandwidth));
                out.push(CellRecord::new(Topic::Power, c.id.clone(), ts, c.power));
            }
            let cl = &clusters[c.cluster];
            let daily = cfg.daily_amp * c.amp * (TAU * sec_of_day / 86_400.0 + cl.phase).sin();
            let profile = if weekend {
                -0.25 + 0.3 * bump(hour, 13.0)
            } else {
                bump(hour, cl.morning_h) + 0.8 * bump(hour, cl.evening_h) + 0.5 * bump(hour, c.local_h)
            };
            c.ar = ar_coef * c.ar + ar_innov * unit.sample(&mut rng);
            let noise = c.ar + iid_sigma * unit.sample(&mut rng);
            let load = (c.base + daily + cfg.weekly_amp * profile * c.amp + c.shock + noise).clamp(0.0, 1.0);
            let ue = (cfg.ue_per_load * load + 0.02 * cfg.ue_per_load * unit.sample(&mut rng)).round().max(0.0);

            let keep_load = rng.random::<f64>() >= cfg.missing_rate;
            let keep_ue = rng.random::<f64>() >= cfg.missing_rate;
            if keep_load {
                out.push(CellRecord::new(Topic::Load, c.id.clone(), ts, load));
            }
            if keep_ue {
                out.push(CellRecord::new(Topic::Ue, c.id.clone(), ts, ue));
            }

            if rsrq_per_step > 0.0 {
                // Quality degrades with load and swings daily.
                c.rsrq_walk = (c.rsrq_walk + walk_sigma * unit.sample(&mut rng)).clamp(-6.0, 6.0);
                let mode = c.rsrq_mode
                    + 0.5 * cfg.rsrq.daily_drift_bins * (TAU * sec_of_day / 86_400.0 + cl.phase).cos()
                    - 10.0 * (load - 0.4)
                    + c.rsrq_walk;
                let n = rsrq_per_step.floor() as usize + usize::from(rng.random::<f64>() < rsrq_per_step.fract());
                for _ in 0..n {
                    let v = (mode + cfg.rsrq.width_bins * unit.sample(&mut rng)).round().clamp(0.0, (RSRQ_BINS - 1) as f64);
                    let offset = rng.random_range(0..cfg.step_seconds);
                    rsrq_batch.push(CellRecord::new(Topic::Rsrq, c.id.clone(), ts + offset, v));
                }
            }
        }
        // RSRQ reports carry sub-step timestamps; keep the stream time-ordered.
        rsrq_batch.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.cell.cmp(&b.cell)));
        out.extend(rsrq_batch);
    }
    Ok(out)
}

/// Ground-truth cluster index of each generated cell, in generation order.
pub fn cluster_of(cfg: &SynthConfig, cell_index: usize) -> usize {
    cell_index % cfg.n_clusters.max(1)
}

/// Emits records to `sink`, pacing them so record `k` leaves
/// `(ts_k - ts_0) / speedup` seconds after the first. An infinite speedup
/// emits flat out.
pub fn replay<F>(records: &[CellRecord], speedup: f64, mut sink: F) -> Result<()>
where
    F: FnMut(&CellRecord) -> Result<()>,
{
    if !(speedup > 0.0) {
        return Err(Error::Config("speedup must be > 0".into()));
    }
    if let Some(i) = records.windows(2).position(|w| w[1].ts < w[0].ts) {
        return Err(Error::InvalidInput(format!("records are not time-ordered at index {}", i + 1)));
    }
    let Some(first) = records.first() else {
        return Ok(());
    };
    let started = Instant::now();
    for r in records {
        if speedup.is_finite() {
            let due = Duration::from_secs_f64((r.ts - first.ts) as f64 / speedup);
            let elapsed = started.elapsed();
            if due > elapsed {
                std::thread::sleep(due - elapsed);
            }
        }
        sink(r)?;
    }
    Ok(())
}
