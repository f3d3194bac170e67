//! Calendar and cell-configuration features fed to the embedding branch.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::series::CellConfig;

pub const EXTERNAL_DIM: usize = 14;

/// Encoded external factors for one prediction instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalFeatures {
    /// Monday = index 0.
    pub day_of_week: [f64; 7],
    pub hour_sin: f64,
    pub hour_cos: f64,
    pub minute_sin: f64,
    pub minute_cos: f64,
    pub band: f64,
    pub power: f64,
    pub bandwidth: f64,
}

/// 0 = Monday, for UTC epoch seconds. 1970-01-01 was a Thursday.
pub fn day_of_week(ts: i64) -> usize {
    (ts.div_euclid(86_400) + 3).rem_euclid(7) as usize
}

impl ExternalFeatures {
    pub fn at(ts: i64, cfg: &CellConfig) -> Self {
        let mut dow = [0.0; 7];
        dow[day_of_week(ts)] = 1.0;
        let sec_of_day = ts.rem_euclid(86_400);
        let hour = (sec_of_day / 3600) as f64;
        let minute = ((sec_of_day % 3600) / 60) as f64;
        let (hs, hc) = (TAU * hour / 24.0).sin_cos();
        let (ms, mc) = (TAU * minute / 60.0).sin_cos();
        Self {
            day_of_week: dow,
            hour_sin: hs,
            hour_cos: hc,
            minute_sin: ms,
            minute_cos: mc,
            band: cfg.band_mhz.map_or(0.0, |b| b / 2600.0),
            power: cfg.power_dbm.map_or(0.0, |p| (p - 30.0) / 20.0),
            bandwidth: cfg.bandwidth_mhz.map_or(0.0, |b| b / 20.0),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(EXTERNAL_DIM);
        v.extend_from_slice(&self.day_of_week);
        v.extend_from_slice(&[
            self.hour_sin,
            self.hour_cos,
            self.minute_sin,
            self.minute_cos,
            self.band,
            self.power,
            self.bandwidth,
        ]);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_weekdays() {
        assert_eq!(day_of_week(0), 3); // Thursday
        assert_eq!(day_of_week(1_704_067_200), 0); // 2024-01-01, Monday
    }

    #[test]
    fn layout_and_config() {
        let cfg = CellConfig {
            band_mhz: Some(1300.0),
            power_dbm: Some(40.0),
            bandwidth_mhz: Some(10.0),
        };
        let f = ExternalFeatures::at(1_704_067_200 + 6 * 3600 + 15 * 60, &cfg);
        let v = f.to_vec();
        assert_eq!(v.len(), EXTERNAL_DIM);
        assert_eq!(v[0], 1.0);
        assert!((f.hour_sin - 1.0).abs() < 1e-15);
        assert!((f.minute_sin - 1.0).abs() < 1e-15);
        assert_eq!((f.band, f.power, f.bandwidth), (0.5, 0.5, 0.5));
    }

    proptest! {
        #[test]
        fn cyclic_pairs_on_unit_circle(ts in 0i64..4_000_000_000) {
            let f = ExternalFeatures::at(ts, &CellConfig::default());
            prop_assert!((f.hour_sin.powi(2) + f.hour_cos.powi(2) - 1.0).abs() < 1e-12);
            prop_assert!((f.minute_sin.powi(2) + f.minute_cos.powi(2) - 1.0).abs() < 1e-12);
            prop_assert_eq!(f.day_of_week.iter().sum::<f64>(), 1.0);
        }
    }
}
