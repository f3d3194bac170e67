mod common;

use std::collections::BTreeMap;
use std::io::Cursor;
use std::sync::Arc;
use std::time::Instant;

use deepauto::cli::batch_predictions;
use deepauto::dataprep::{CellRecord, Topic};
use deepauto::model::{DeepAutoParams, Model};
use deepauto::stream::{http_get, http_request, ingest_reader, Engine, EngineOptions, HttpServer, Readiness};

use common::{clean_records, ndjson, small_config, untrained_model};

type Keyed = BTreeMap<(String, i64), Vec<u64>>;

fn keyed<'a>(preds: impl IntoIterator<Item = &'a deepauto::stream::PredictionRecord>, model: &Model) -> Keyed {
    preds
        .into_iter()
        .map(|p| {
            let bits = p.values(&model.config.output).iter().map(|v| v.to_bits()).collect();
            ((p.cell_id.clone(), p.anchor_ts), bits)
        })
        .collect()
}

#[test]
fn replay_matches_batch_predictions_bit_for_bit() {
    let records = clean_records(6, 2, 900, 11);
    let cfg = small_config(900, 8, 1, vec![1, 4]);
    let model = untrained_model(&cfg, &records);
    let batch = batch_predictions(&model, &records).unwrap();
    assert!(!batch.is_empty());

    let engine = Engine::with_model(model.clone(), EngineOptions::default()).unwrap();
    let rx = engine.subscribe();
    ingest_reader(&engine, Cursor::new(ndjson(&records))).unwrap();
    engine.flush(Instant::now());
    drop(engine);
    let streamed: Vec<_> = rx
        .into_iter()
        .map(|line| serde_json::from_str::<deepauto::stream::PredictionRecord>(&line).unwrap())
        .collect();

    assert_eq!(streamed.len(), batch.len(), "one prediction per anchor");
    assert_eq!(keyed(&streamed, &model), keyed(&batch, &model));
    assert!(streamed.iter().all(|p| p.model_version == 1));
}

#[test]
fn health_counts_a_controlled_replay() {
    let cfg = small_config(60, 3, 0, vec![1]);
    let model = untrained_model(&cfg, &clean_records(1, 1, 60, 1));
    let engine = Engine::with_model(model, EngineOptions::default()).unwrap();

    let mut text = String::new();
    for i in 0..10 {
        text += &format!("{{\"topic\":\"load\",\"cell\":\"a\",\"ts\":{},\"value\":0.5}}\n", i * 60);
        text += &format!("{{\"topic\":\"ue\",\"cell\":\"a\",\"ts\":{},\"value\":10}}\n", i * 60);
    }
    text += "not json\n{\"topic\":\"load\"}\n";
    text += "{\"topic\":\"load\",\"cell\":\"a\",\"ts\":600,\"value\":1.5}\n";
    // Bucket 1 closed long ago.
    text += "{\"topic\":\"load\",\"cell\":\"a\",\"ts\":60,\"value\":0.5}\n";
    ingest_reader(&engine, Cursor::new(text)).unwrap();
    engine.flush(Instant::now());

    let h = engine.health();
    assert_eq!(h.ingested, 21);
    assert_eq!(h.malformed, 2);
    assert_eq!(h.out_of_range, 1);
    assert_eq!(h.late, 1);
    assert_eq!(h.cells, 1);
    assert_eq!(h.cells_ready, 1);
    // Anchors 3..=10 once the ten buckets are closed.
    assert_eq!(h.predictions, 8);
    assert_eq!(h.status, "ok");
}

#[test]
fn all_zero_model_predicts_one_half() {
    let cfg = small_config(60, 2, 0, vec![1, 5]);
    let records: Vec<CellRecord> = (0..4)
        .flat_map(|i| [CellRecord::new(Topic::Load, "z", i * 60, 0.9), CellRecord::new(Topic::Ue, "z", i * 60, 3.0)])
        .collect();
    let mut model = untrained_model(&cfg, &clean_records(1, 1, 60, 1));
    model.params = DeepAutoParams::zeros(&cfg);
    let engine = Engine::with_model(model, EngineOptions::default()).unwrap();
    for r in &records {
        engine.ingest_record(r, Instant::now());
    }
    engine.flush(Instant::now());
    let p = engine.latest("z").expect("prediction after flush");
    assert_eq!(p.horizon(1), Some(0.5));
    assert_eq!(p.horizon(5), Some(0.5));
    assert_eq!(p.anchor_ts, 240);
}

#[test]
fn warming_cell_has_no_prediction() {
    let cfg = small_config(60, 5, 0, vec![1]);
    let records: Vec<CellRecord> = (0..3).map(|i| CellRecord::new(Topic::Load, "w", i * 60, 0.2)).collect();
    let model = untrained_model(&cfg, &clean_records(1, 1, 60, 1));
    let engine = Engine::with_model(model, EngineOptions::default()).unwrap();
    for r in &records {
        engine.ingest_record(r, Instant::now());
    }
    engine.flush(Instant::now());
    assert!(engine.latest("w").is_none());
    assert_eq!(engine.readiness("w"), Some(Readiness::Warming));
    assert_eq!(engine.readiness("nobody"), None);
}

#[test]
fn records_without_a_model_are_counted() {
    let engine = Engine::new(EngineOptions::default());
    engine.ingest_record(&CellRecord::new(Topic::Load, "a", 0, 0.1), Instant::now());
    let h = engine.health();
    assert_eq!(h.status, "no_model");
    assert_eq!(h.no_model, 1);
    assert_eq!(h.model_version, None);
}

#[test]
fn corrupt_reload_keeps_serving_the_old_model() {
    let dir = tempfile::tempdir().unwrap();
    let records = clean_records(2, 1, 900, 3);
    let cfg = small_config(900, 4, 0, vec![1]);
    let good = dir.path().join("good.daut");
    untrained_model(&cfg, &records).save(&good).unwrap();
    let mut bytes = std::fs::read(&good).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    let bad = dir.path().join("bad.daut");
    std::fs::write(&bad, &bytes).unwrap();
    let truncated = dir.path().join("short.daut");
    std::fs::write(&truncated, &bytes[..10]).unwrap();

    let engine = Arc::new(Engine::new(EngineOptions::default()));
    assert_eq!(engine.reload_from(&good).unwrap(), 1);
    assert!(engine.reload_from(&bad).is_err());
    assert!(engine.reload_from(&truncated).is_err());
    assert!(engine.reload_from(&dir.path().join("missing.daut")).is_err());
    let h = engine.health();
    assert_eq!(h.model_version, Some(1));
    assert_eq!(h.reload_failures, 3);

    let server = HttpServer::start(engine.clone(), "127.0.0.1:0").unwrap();
    let body = format!("{{\"path\":{}}}", serde_json::to_string(&bad).unwrap());
    let (status, resp) = http_request(server.addr(), "POST", "/reload", &body).unwrap();
    assert_eq!(status, 422);
    let v: serde_json::Value = serde_json::from_str(&resp).unwrap();
    assert_eq!(v["error"], "reload_failed");
    assert_eq!(v["model_version"], 1);

    // An empty body reloads the last good path.
    let (status, resp) = http_request(server.addr(), "POST", "/reload", "").unwrap();
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&resp).unwrap()["model_version"], 2);
    server.shutdown();
}

#[test]
fn http_endpoints_report_cells() {
    let records = clean_records(2, 1, 900, 5);
    let cfg = small_config(900, 4, 0, vec![1]);
    let engine = Arc::new(Engine::with_model(untrained_model(&cfg, &records), EngineOptions::default()).unwrap());
    ingest_reader(&engine, Cursor::new(ndjson(&records))).unwrap();
    engine.flush(Instant::now());
    let last_ts = records.iter().map(|r| r.ts).max().unwrap();
    engine.ingest_record(&CellRecord::new(Topic::Load, "fresh", last_ts + 900, 0.3), Instant::now());

    let server = HttpServer::start(engine.clone(), "127.0.0.1:0").unwrap();
    let addr = server.addr();
    let cell = &records[0].cell;

    let (status, body) = http_get(addr, &format!("/predictions/{cell}")).unwrap();
    assert_eq!(status, 200);
    let p: deepauto::stream::PredictionRecord = serde_json::from_str(&body).unwrap();
    assert_eq!(&p.cell_id, cell);
    assert!(p.horizon(1).is_some());

    let (status, body) = http_get(addr, "/predictions/unknown").unwrap();
    assert_eq!(status, 404);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&body).unwrap()["error"], "unknown_cell");

    let (status, body) = http_get(addr, "/predictions/fresh").unwrap();
    assert_eq!(status, 404);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["error"], "not_ready");
    assert_eq!(v["readiness"], "warming");

    let (status, body) = http_get(addr, "/health").unwrap();
    assert_eq!(status, 200);
    let h: deepauto::stream::Health = serde_json::from_str(&body).unwrap();
    assert_eq!(h.cells, 3);
    assert_eq!(h.model_version, Some(1));

    assert_eq!(http_request(addr, "DELETE", "/health", "").unwrap().0, 405);
    assert_eq!(http_get(addr, "/nope").unwrap().0, 404);
    server.shutdown();
}

#[test]
fn idle_cells_are_evicted() {
    let cfg = small_config(60, 2, 0, vec![1]);
    let model = untrained_model(&cfg, &clean_records(1, 1, 60, 1));
    let engine = Engine::with_model(
        model,
        EngineOptions {
            idle_ttl_seconds: 600,
            ..EngineOptions::default()
        },
    )
    .unwrap();
    engine.ingest_record(&CellRecord::new(Topic::Load, "old", 0, 0.2), Instant::now());
    engine.ingest_record(&CellRecord::new(Topic::Load, "new", 3_600, 0.2), Instant::now());
    let h = engine.health();
    assert_eq!(h.evicted, 1);
    assert_eq!(h.cells, 1);
    assert_eq!(engine.readiness("old"), None);
}

#[test]
fn unpaced_idle_tick_does_not_jump_event_time() {
    let cfg = small_config(60, 2, 0, vec![1]);
    let model = untrained_model(&cfg, &clean_records(1, 1, 60, 1));
    let engine = Engine::with_model(model, EngineOptions::default()).unwrap();
    let t0 = Instant::now();
    engine.ingest_record(&CellRecord::new(Topic::Load, "a", 0, 0.2), t0);
    engine.tick(t0 + std::time::Duration::from_secs(5), f64::INFINITY);
    let h = engine.health();
    assert_eq!(h.evicted, 0);
    assert_eq!(h.cells, 1);
}

#[test]
fn unpaced_file_replay_through_serve_matches_batch() {
    let dir = tempfile::tempdir().unwrap();
    let records = clean_records(20, 3, 900, 13);
    let cfg = small_config(900, 8, 2, vec![1, 8]);
    let model = untrained_model(&cfg, &records);
    let batch = batch_predictions(&model, &records).unwrap();
    let data = dir.path().join("in.ndjson");
    std::fs::write(&data, ndjson(&records)).unwrap();

    let engine = Arc::new(Engine::with_model(model.clone(), EngineOptions::default()).unwrap());
    let rx = engine.subscribe();
    let opts = deepauto::stream::ServeOptions {
        listen_http: "127.0.0.1:0".into(),
        listen_ingest: None,
        listen_firehose: None,
        input: Some(data),
        speedup: f64::INFINITY,
        exit_after_input: true,
    };
    deepauto::stream::serve(engine.clone(), &opts).unwrap();
    let streamed: Vec<deepauto::stream::PredictionRecord> =
        rx.try_iter().map(|l| serde_json::from_str(&l).unwrap()).collect();
    assert_eq!(engine.health().evicted, 0);
    assert_eq!(keyed(&streamed, &model), keyed(&batch, &model));
}
