//! HTTP query endpoints, NDJSON ingest over TCP or any reader, and the
//! prediction firehose.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use serde::Deserialize;
use tiny_http::{Header, Method, Request, Response, Server};

use super::engine::Engine;
use crate::dataprep::{parse_line, ParsedLine};
use crate::error::{Error, Result};

/// Feeds every line of `reader` to the engine. Returns the number of lines.
pub fn ingest_reader<R: BufRead>(engine: &Engine, mut reader: R) -> Result<u64> {
    let mut buf = Vec::new();
    let mut lines = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(lines);
        }
        lines += 1;
        let received = Instant::now();
        match std::str::from_utf8(&buf) {
            Ok(line) => {
                engine.ingest_line(line, received);
            }
            // Not UTF-8, hence not JSON; counted like any other malformed line.
            Err(_) => {
                engine.ingest_line("\u{1}", received);
            }
        }
    }
}

/// Like [`ingest_reader`] but paces lines by their record timestamps so
/// stream time runs `speedup` times faster than wall time. Lines without a
/// valid record are ingested (and counted) immediately.
pub fn replay_reader<R: BufRead>(engine: &Engine, reader: R, speedup: f64) -> Result<u64> {
    if !(speedup > 0.0) {
        return Err(Error::Config("speedup must be > 0".into()));
    }
    if speedup.is_infinite() {
        return ingest_reader(engine, reader);
    }
    let started = Instant::now();
    let mut first_ts = None;
    let mut lines = 0;
    for line in reader.split(b'\n') {
        let line = line?;
        lines += 1;
        let text = std::str::from_utf8(&line).unwrap_or("\u{1}");
        if let ParsedLine::Record(r) = parse_line(text) {
            let t0 = *first_ts.get_or_insert(r.ts);
            let due = Duration::from_secs_f64(((r.ts - t0).max(0)) as f64 / speedup);
            let elapsed = started.elapsed();
            if due > elapsed {
                std::thread::sleep(due - elapsed);
            }
        }
        engine.ingest_line(text, Instant::now());
    }
    Ok(lines)
}

/// Accepts NDJSON producers on `addr`, one thread per connection.
pub fn spawn_ingest_tcp(engine: Arc<Engine>, addr: &str) -> Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let handle = std::thread::spawn(move || {
        for conn in listener.incoming() {
            match conn {
                Ok(stream) => {
                    let engine = engine.clone();
                    std::thread::spawn(move || {
                        let peer = stream.peer_addr().ok();
                        match ingest_reader(&engine, BufReader::new(stream)) {
                            Ok(n) => debug!("ingest connection {peer:?} closed after {n} lines"),
                            Err(e) => warn!("ingest connection {peer:?}: {e}"),
                        }
                    });
                }
                Err(e) => warn!("ingest accept failed: {e}"),
            }
        }
    });
    Ok((local, handle))
}

/// Streams every published prediction as NDJSON to each connected client.
pub fn spawn_firehose(engine: Arc<Engine>, addr: &str) -> Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let handle = std::thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(mut stream) = conn else { continue };
            let rx = engine.subscribe();
            std::thread::spawn(move || {
                for line in rx {
                    if stream.write_all(line.as_bytes()).and_then(|_| stream.write_all(b"\n")).is_err() {
                        break;
                    }
                }
            });
        }
    });
    Ok((local, handle))
}

/// Calls [`Engine::tick`] every `period` until `stop` is set.
pub fn spawn_watermark_timer(engine: Arc<Engine>, speedup: f64, period: Duration, stop: Arc<AtomicBool>) -> JoinHandle<()> {
    std::thread::spawn(move || {
        while !stop.load(Ordering::Relaxed) {
            std::thread::sleep(period);
            engine.tick(Instant::now(), speedup);
        }
    })
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").expect("static header"))
}

fn error_body(code: &str) -> String {
    serde_json::json!({ "error": code }).to_string()
}

#[derive(Deserialize)]
struct ReloadBody {
    path: Option<PathBuf>,
}

fn route(engine: &Engine, req: &mut Request) -> (u16, String) {
    let url = req.url().split('?').next().unwrap_or("").to_string();
    match (req.method(), url.as_str()) {
        (Method::Get, "/health") => (200, serde_json::to_string(&engine.health()).expect("health serializes")),
        (Method::Get, path) if path.starts_with("/predictions/") => {
            let cell = &path["/predictions/".len()..];
            match engine.latest(cell) {
                Some(p) => (200, p.to_json_line()),
                None => match engine.readiness(cell) {
                    Some(r) => (404, serde_json::json!({ "error": "not_ready", "readiness": r }).to_string()),
                    None => (404, error_body("unknown_cell")),
                },
            }
        }
        (Method::Post, "/reload") => {
            let mut body = String::new();
            if req.as_reader().read_to_string(&mut body).is_err() {
                return (400, error_body("unreadable_body"));
            }
            let path = if body.trim().is_empty() {
                None
            } else {
                match serde_json::from_str::<ReloadBody>(&body) {
                    Ok(b) => b.path,
                    Err(_) => return (400, error_body("bad_request")),
                }
            };
            let result = match path {
                Some(p) => engine.reload_from(&p),
                None => engine.reload(),
            };
            match result {
                Ok(v) => (200, serde_json::json!({ "model_version": v }).to_string()),
                Err(e) => (
                    422,
                    serde_json::json!({
                        "error": "reload_failed",
                        "detail": e.to_string(),
                        "model_version": engine.model().map(|m| m.version),
                    })
                    .to_string(),
                ),
            }
        }
        (_, "/health" | "/reload") => (405, error_body("method_not_allowed")),
        (_, p) if p.starts_with("/predictions/") => (405, error_body("method_not_allowed")),
        _ => (404, error_body("not_found")),
    }
}

/// The query service on its own thread.
pub struct HttpServer {
    server: Arc<Server>,
    addr: SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl HttpServer {
    pub fn start(engine: Arc<Engine>, addr: &str) -> Result<Self> {
        let server = Arc::new(Server::http(addr).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?);
        let local = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Config("HTTP server is not bound to an IP address".into()))?;
        let s = server.clone();
        let handle = std::thread::spawn(move || {
            for mut req in s.incoming_requests() {
                let (status, body) = route(&engine, &mut req);
                if let Err(e) = req.respond(json_response(status, body)) {
                    debug!("http respond failed: {e}");
                }
            }
        });
        Ok(Self {
            server,
            addr: local,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.server.unblock();
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub listen_http: String,
    pub listen_ingest: Option<String>,
    pub listen_firehose: Option<String>,
    /// NDJSON file replayed into the engine; `-` reads standard input.
    /// Open buckets are flushed at end of input.
    pub input: Option<PathBuf>,
    /// Stream-time to wall-time ratio for the replay and the idle watermark.
    pub speedup: f64,
    /// Print the health report and return once the input is consumed.
    pub exit_after_input: bool,
}

/// Runs the service. Bound addresses are printed to stdout as one JSON line;
/// with `exit_after_input` the final health report follows.
pub fn serve(engine: Arc<Engine>, opts: &ServeOptions) -> Result<()> {
    let http = HttpServer::start(engine.clone(), &opts.listen_http)?;
    let mut announce = serde_json::json!({ "http": http.addr().to_string() });
    if let Some(a) = &opts.listen_ingest {
        let (addr, _) = spawn_ingest_tcp(engine.clone(), a)?;
        announce["ingest"] = addr.to_string().into();
    }
    if let Some(a) = &opts.listen_firehose {
        let (addr, _) = spawn_firehose(engine.clone(), a)?;
        announce["firehose"] = addr.to_string().into();
    }
    println!("{announce}");
    std::io::stdout().flush()?;
    info!("serving {announce}");
    let stop = Arc::new(AtomicBool::new(false));
    let timer = spawn_watermark_timer(engine.clone(), opts.speedup, Duration::from_millis(250), stop.clone());
    if let Some(path) = &opts.input {
        let n = if path.as_os_str() == "-" {
            replay_reader(&engine, std::io::stdin().lock(), opts.speedup)?
        } else {
            replay_reader(&engine, BufReader::new(std::fs::File::open(path)?), opts.speedup)?
        };
        engine.flush(Instant::now());
        info!("input consumed after {n} lines");
    }
    if opts.exit_after_input {
        println!("{}", serde_json::to_string(&engine.health()).expect("health serializes"));
        std::io::stdout().flush()?;
        http.shutdown();
    } else {
        http.join();
    }
    stop.store(true, Ordering::Relaxed);
    let _ = timer.join();
    Ok(())
}

/// Minimal blocking HTTP GET used by tests and examples.
#[doc(hidden)]
pub fn http_get(addr: SocketAddr, path: &str) -> std::io::Result<(u16, String)> {
    http_request(addr, "GET", path, "")
}

#[doc(hidden)]
pub fn http_request(addr: SocketAddr, method: &str, path: &str, body: &str) -> std::io::Result<(u16, String)> {
    let mut s = TcpStream::connect(addr)?;
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    let mut resp = String::new();
    s.read_to_string(&mut resp)?;
    let status = resp
        .split_whitespace()
        .nth(1)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| std::io::Error::other("bad status line"))?;
    let body = resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    Ok((status, body))
}
