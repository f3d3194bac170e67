use super::series::KpiSeries;
use crate::error::{Error, Result};

/// Fills missing values: linear between the nearest observed neighbours,
/// nearest-value extension at the leading and trailing edges.
pub fn interpolate_missing(series: &KpiSeries) -> Result<KpiSeries> {
    let mut out = series.clone();
    let (t_len, nc) = (series.len(), series.n_channels());
    for c in 0..nc {
        let observed: Vec<usize> = (0..t_len).filter(|&t| !series.is_missing(t, c)).collect();
        let (Some(&first), Some(&last)) = (observed.first(), observed.last()) else {
            if t_len == 0 {
                continue;
            }
            return Err(Error::AllMissing {
                cell: series.cell_id.clone(),
                channel: series.channels[c].clone(),
            });
        };
        let v = |t: usize| series.values.get(t, c);
        for t in 0..first {
            out.values.set(t, c, v(first));
        }
        for t in last + 1..t_len {
            out.values.set(t, c, v(last));
        }
        for pair in observed.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (va, vb) = (v(a), v(b));
            let span = (b - a) as f64;
            for t in a + 1..b {
                let w = (t - a) as f64 / span;
                out.values.set(t, c, va + (vb - va) * w);
            }
        }
    }
    out.missing.iter_mut().for_each(|m| *m = false);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NAN: f64 = f64::NAN;

    fn series(col: &[f64]) -> KpiSeries {
        let rows: Vec<Vec<f64>> = col.iter().map(|v| vec![*v]).collect();
        KpiSeries::from_rows("c", 0, 60, vec!["load".into()], &rows).unwrap()
    }

    #[test]
    fn midpoint_fill() {
        let s = interpolate_missing(&series(&[1.0, NAN, 3.0])).unwrap();
        assert_eq!(s.column(0), vec![1.0, 2.0, 3.0]);
        assert!(s.fully_observed());
    }

    #[test]
    fn edges_extend_nearest() {
        let s = interpolate_missing(&series(&[NAN, 2.0, NAN])).unwrap();
        assert_eq!(s.column(0), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn three_step_gap() {
        let s = interpolate_missing(&series(&[0.0, NAN, NAN, 0.9])).unwrap();
        let c = s.column(0);
        assert_eq!(c[0], 0.0);
        assert!((c[1] - 0.3).abs() < 1e-15);
        assert!((c[2] - 0.6).abs() < 1e-15);
        assert_eq!(c[3], 0.9);
    }

    #[test]
    fn all_missing_names_cell_and_channel() {
        match interpolate_missing(&series(&[NAN, NAN])) {
            Err(Error::AllMissing { cell, channel }) => {
                assert_eq!(cell, "c");
                assert_eq!(channel, "load");
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn idempotent(v in proptest::collection::vec(proptest::option::weighted(0.6, 0.0f64..1.0), 1..60)) {
            prop_assume!(v.iter().any(Option::is_some));
            let col: Vec<f64> = v.iter().map(|x| x.unwrap_or(NAN)).collect();
            let once = interpolate_missing(&series(&col)).unwrap();
            let twice = interpolate_missing(&once).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
