//! Runs the streaming engine: NDJSON records over TCP, per-cell predictions
//! over HTTP and a firehose of every published forecast.
//!
//!     cargo run --example streaming_server

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::{Duration, Instant};

use deepauto::dataprep::{write_records, Dataset, OutputKind, WindowSpec};
use deepauto::model::{DeepAutoConfig, DeepAutoParams, Model};
use deepauto::stream::{http_get, spawn_firehose, spawn_ingest_tcp, Engine, EngineOptions, HttpServer};
use deepauto::synthgen::{generate, SynthConfig};

fn main() -> deepauto::Result<()> {
    let records = generate(&SynthConfig {
        n_cells: 5,
        days: 1,
        step_seconds: 60,
        missing_rate: 0.0,
        ..SynthConfig::default()
    })?;
    let cfg = DeepAutoConfig {
        step_seconds: 60,
        window: WindowSpec::for_step(60, 10, 0, 0),
        output: OutputKind::ScalarHorizons(vec![1, 15, 60]),
        hidden_r: 8,
        ..DeepAutoConfig::default()
    }
    .resolved()?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    let model = Model {
        params: DeepAutoParams::init(&cfg),
        config: cfg,
        scaler: ds.scaler,
    };

    let engine = Arc::new(Engine::with_model(model, EngineOptions::default())?);
    let http = HttpServer::start(engine.clone(), "127.0.0.1:0")?;
    let (ingest_addr, _) = spawn_ingest_tcp(engine.clone(), "127.0.0.1:0")?;
    let (firehose_addr, _) = spawn_firehose(engine.clone(), "127.0.0.1:0")?;
    println!("http {}, ingest {ingest_addr}, firehose {firehose_addr}", http.addr());

    let firehose = TcpStream::connect(firehose_addr)?;
    std::thread::sleep(Duration::from_millis(100));

    // The first half hour of the day, sent by a producer over TCP.
    let start = records.iter().map(|r| r.ts).min().unwrap_or(0);
    let early: Vec<_> = records.into_iter().filter(|r| r.ts < start + 30 * 60).collect();
    let mut producer = TcpStream::connect(ingest_addr)?;
    let mut buf = Vec::new();
    write_records(&mut buf, &early)?;
    producer.write_all(&buf)?;
    drop(producer);

    let deadline = Instant::now() + Duration::from_secs(5);
    while engine.health().ingested < early.len() as u64 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(20));
    }
    engine.flush(Instant::now());

    let mut lines = BufReader::new(firehose).lines();
    if let Some(Ok(first)) = lines.next() {
        println!("firehose: {first}");
    }
    let cell = &early[0].cell;
    let (status, body) = http_get(http.addr(), &format!("/predictions/{cell}"))?;
    println!("GET /predictions/{cell} → {status} {body}");
    let (status, body) = http_get(http.addr(), "/health")?;
    println!("GET /health → {status} {body}");
    http.shutdown();
    Ok(())
}
