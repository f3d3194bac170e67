mod common;

use deepauto::dataprep::{build_series, split_counts, CellRecord, Dataset, TargetSpec, Topic};
use deepauto::eval::{compare_report, Forecaster, Naive, RidgeAr};
use deepauto::model::{train_dataset, DeepAutoConfig, Model};
use deepauto::synthgen::{generate, SynthConfig};

use common::small_config;

#[test]
fn prepared_dataset_respects_split_and_window_contracts() {
    let records = generate(&SynthConfig {
        n_cells: 4,
        days: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = small_config(900, 8, 1, vec![1, 8]);
    let ds = Dataset::prepare(&records, &cfg.data_spec()).unwrap();
    assert_eq!(ds.cells.len(), 4);
    for c in &ds.cells {
        let n = c.train.len() + c.val.len() + c.test.len();
        assert_eq!((c.train.len(), c.val.len(), c.test.len()), split_counts(n).unwrap());
        assert!(c.raw.fully_observed(), "interpolation leaves no gaps");
    }
    let TargetSpec::Horizons { horizons, .. } = ds.spec.target_spec().unwrap() else {
        panic!("scalar head expected");
    };
    assert_eq!(horizons, vec![1, 8]);
    for s in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        assert_eq!(s.x_recent.rows(), 8);
        assert_eq!(s.x_periodic.rows(), 1);
        assert!(s.x_recent.as_slice().iter().all(|v| v.is_finite()));
        assert!(s.target.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    // Splits are chronological within a cell.
    let c0 = &ds.cells[0];
    assert!(ds.train[c0.train.end - 1].anchor_t < ds.val[c0.val.start].anchor_t);
    assert!(ds.val[c0.val.end - 1].anchor_t < ds.test[c0.test.start].anchor_t);
}

#[test]
fn constant_target_is_learned() {
    let records: Vec<_> = (0..400)
        .flat_map(|t| {
            [
                CellRecord::new(Topic::Load, "k", t * 900, 0.35),
                CellRecord::new(Topic::Ue, "k", t * 900, (t % 7) as f64),
            ]
        })
        .collect();
    let cfg = DeepAutoConfig {
        max_epochs: 50,
        patience: 50,
        lr_patience: 0,
        batch_size: 64,
        lr: 0.02,
        ..small_config(900, 3, 0, vec![1])
    };
    let ds = Dataset::prepare(&records, &cfg.data_spec()).unwrap();
    let (_, report) = train_dataset(&ds, &cfg).unwrap();
    let last = report.epochs.last().unwrap().train_loss;
    assert!(last < 1e-4, "train loss {last}");
}

#[test]
fn compare_report_covers_every_algorithm() {
    let records = generate(&SynthConfig {
        n_cells: 3,
        days: 7,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = DeepAutoConfig {
        max_epochs: 4,
        ..small_config(900, 8, 1, vec![1, 4])
    };
    let ds = Dataset::prepare(&records, &cfg.data_spec()).unwrap();
    let (params, report) = train_dataset(&ds, &cfg).unwrap();
    assert!(report.epochs.iter().all(|e| e.train_loss.is_finite() && e.val_loss.is_finite()));
    let model = Model {
        config: cfg,
        params,
        scaler: ds.scaler.clone(),
    };
    let ridge = RidgeAr::fit(&ds.train, 0, 1e-3).unwrap();
    let models: [&dyn Forecaster; 3] = [&Naive, &ridge, &model];
    let report = compare_report(&ds, &models, &ds.test, 0.3);
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    for alg in ["naive", "ridge-ar", "deepauto"] {
        for h in [1, 4] {
            let row = report.row(alg, h).unwrap();
            assert!(row.rmse.is_finite() && row.rmse < 0.5, "{alg} h{h}: {}", row.rmse);
        }
    }
}

#[test]
fn build_series_aligns_channels_to_the_step_grid() {
    let records = generate(&SynthConfig {
        n_cells: 2,
        days: 1,
        missing_rate: 0.0,
        ..SynthConfig::default()
    })
    .unwrap();
    let series = build_series(&records, 900, &["load".into(), "ue".into()]).unwrap();
    assert_eq!(series.len(), 2);
    for s in &series {
        assert_eq!(s.len(), 96);
        assert_eq!(s.start_ts % 900, 0);
        assert!(s.fully_observed());
    }
}
