//! Command-line front end. Reports are JSON on stdout (or `--output`);
//! diagnostics are JSON lines on stderr, filtered by `DEEPAUTO_LOG`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or model
//! error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dataprep::{
    autocorrelation, build_series, inference_series, interpolate_missing, read_records_file, write_records, CellRecord,
    Dataset, OutputKind, ScalerParams, TargetSpec,
};
use crate::error::{Error, Result};
use crate::eval::{compare_report, CompareReport, Forecaster, Metrics, Naive, ReportRow, RidgeAr, SeasonalNaive};
use crate::eval::{kl_eval, DEFAULT_MAPE_THRESHOLD, DEFAULT_RIDGE_LAMBDA};
use crate::model::{default_candidates, grid_search, train_dataset, DeepAutoConfig, GridCandidate, Model};
use crate::stream::{serve, Engine, EngineOptions, PredictionRecord, ServeOptions};
use crate::synthgen::{generate, SynthConfig};

/// Env var holding the log filter, e.g. `debug` or `deepauto::stream=trace`.
pub const LOG_ENV: &str = "DEEPAUTO_LOG";

#[derive(Debug, Parser)]
#[command(name = "deepauto", version, about = "Multi-horizon cellular KPI forecasting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic NDJSON record stream.
    Generate(GenerateArgs),
    /// Summarize the windowed dataset and fitted scaler for a record file.
    Prepare(DataArgs),
    /// Train a model; writes the model file and prints the training report.
    Train(TrainArgs),
    /// Train one model per feature setting and rank them.
    Grid(GridArgs),
    /// Compare the model with baselines on the test split.
    Evaluate(EvaluateArgs),
    /// Autocorrelation of the target channel as CSV.
    Acf(AcfArgs),
    /// Run the streaming engine and its HTTP endpoints.
    Serve(ServeArgs),
    /// Batch predictions from a model file and a record file.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON document or path to one.
    #[arg(long)]
    pub config: Option<String>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    /// Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 50 cells, 28 days, 15-minute steps.
    Default,
    /// 5-minute steps with RSRQ reports.
    ChannelQuality,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Training report path; defaults to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// JSON list of `{"n_r", "n_p", "n_s", "use_external"}` objects, or a path.
    #[arg(long)]
    pub candidates: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// MAPE is computed only where the true load is at least this value.
    #[arg(long, default_value_t = DEFAULT_MAPE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AcfArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Model configuration supplying the step and the target channel.
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Largest lag in steps; defaults to eight days.
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen_http: String,
    /// NDJSON ingest over TCP.
    #[arg(long)]
    pub listen_ingest: Option<String>,
    /// NDJSON stream of every published prediction.
    #[arg(long)]
    pub listen_firehose: Option<String>,
    /// Record file to replay, `-` for stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Stream seconds per wall second; `inf` replays flat out.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub speedup: f64,
    /// Print the health report and exit once `--input` is consumed.
    #[arg(long)]
    pub exit_after_input: bool,
    /// Evict cells silent for this many stream seconds.
    #[arg(long, default_value_t = 86_400)]
    pub idle_ttl: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    /// Every anchor with a full window, up to the step after the last record.
    All,
    /// Test-split anchors, with metrics against the observed targets.
    Test,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::All)]
    pub split: Split,
    #[arg(long, default_value_t = DEFAULT_MAPE_THRESHOLD)]
    pub threshold: f64,
    /// Prediction NDJSON; defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Metrics report for `--split test`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Initializes the stderr JSON-lines logger once; later calls are no-ops.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "info");
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .format(|buf, rec| {
            let line = serde_json::json!({
                "level": rec.level().as_str().to_ascii_lowercase(),
                "target": rec.target(),
                "msg": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Acf(a) => cmd_acf(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

/// Inline JSON (starting with `{` or `[`) or a file path.
fn json_arg<T: DeserializeOwned>(arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read {arg}: {e}")))?
    };
    Ok(serde_json::from_str(&text)?)
}

fn model_config(args: &ConfigArgs) -> Result<DeepAutoConfig> {
    let mut cfg: DeepAutoConfig = match &args.config {
        Some(c) => json_arg(c)?,
        None => DeepAutoConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.resolved()
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output_writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_records(path: &Path) -> Result<Vec<CellRecord>> {
    let batch = read_records_file(path)?;
    if batch.malformed + batch.out_of_range > 0 {
        warn!(
            "{}: skipped {} malformed and {} out-of-range lines",
            path.display(),
            batch.malformed,
            batch.out_of_range
        );
    }
    info!("{}: {} records", path.display(), batch.records.len());
    Ok(batch.records)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = match (&a.cfg.config, a.preset) {
        (Some(c), _) => json_arg::<SynthConfig>(c)?,
        (None, Preset::Default) => SynthConfig::default(),
        (None, Preset::ChannelQuality) => SynthConfig::channel_quality(),
    };
    if let Some(s) = a.cfg.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let records = generate(&cfg)?;
    write_records(output_writer(a.output.as_deref())?, &records)?;
    info!("generated {} records for {} cells", records.len(), cfg.n_cells);
    Ok(())
}

#[derive(Serialize)]
struct PreparedCell {
    cell_id: String,
    start_ts: i64,
    steps: usize,
    /// Anchor steps `[first, last]` of each split.
    train: [usize; 2],
    val: [usize; 2],
    test: [usize; 2],
}

/// What `prepare` writes: enough to rebuild the windows from the record file.
#[derive(Serialize)]
struct PreparedDataset<'a> {
    config: &'a DeepAutoConfig,
    scaler: &'a ScalerParams,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    cells: Vec<PreparedCell>,
    diagnostics: &'a [String],
}

fn cmd_prepare(a: DataArgs) -> Result<()> {
    let cfg = model_config(&a.cfg)?;
    let records = load_records(&a.input)?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    let span = |s: &[crate::dataprep::WindowedSample]| [s.first().map_or(0, |w| w.anchor_t), s.last().map_or(0, |w| w.anchor_t)];
    let cells = ds
        .cells
        .iter()
        .map(|c| PreparedCell {
            cell_id: c.cell_id.clone(),
            start_ts: c.raw.start_ts,
            steps: c.raw.len(),
            train: span(&ds.train[c.train.clone()]),
            val: span(&ds.val[c.val.clone()]),
            test: span(&ds.test[c.test.clone()]),
        })
        .collect();
    write_json(
        a.output.as_deref(),
        &PreparedDataset {
            config: &cfg,
            scaler: &ds.scaler,
            n_train: ds.train.len(),
            n_val: ds.val.len(),
            n_test: ds.test.len(),
            cells,
            diagnostics: &ds.diagnostics,
        },
    )
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = model_config(&a.cfg)?;
    let records = load_records(&a.input)?;
    let ds = Dataset::prepare(&records, &cfg.data_spec())?;
    info!("training on {} samples ({} validation)", ds.train.len(), ds.val.len());
    let (params, report) = train_dataset(&ds, &cfg)?;
    let model = Model {
        config: cfg,
        params,
        scaler: ds.scaler.clone(),
    };
    model.save(&a.output)?;
    info!("model written to {}", a.output.display());
    write_json(a.report.as_deref(), &report)
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let base = model_config(&a.cfg)?;
    let candidates: Vec<GridCandidate> = match &a.candidates {
        Some(c) => json_arg(c)?,
        None => default_candidates(),
    };
    let records = load_records(&a.input)?;
    let series = build_series(&records, base.step_seconds, &base.channels)?;
    let report = grid_search(&series, &base, &candidates)?;
    eprint!("{}", report.to_text());
    write_json(a.output.as_deref(), &report)
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    config: &'a DeepAutoConfig,
    threshold: f64,
    n_test: usize,
    #[serde(flatten)]
    report: CompareReport,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let records = load_records(&a.input)?;
    let ds = Dataset::prepare_with_scaler(&records, &model.config.data_spec(), &model.scaler)?;
    let mut models: Vec<Box<dyn Forecaster>> = vec![Box::new(Naive)];
    if matches!(model.config.output, OutputKind::ScalarHorizons(_)) {
        models.push(Box::new(SeasonalNaive {
            period: model.config.window.period_steps,
        }));
        models.push(Box::new(RidgeAr::fit(&ds.train, 0, DEFAULT_RIDGE_LAMBDA)?));
    }
    let refs: Vec<&dyn Forecaster> = models.iter().map(|m| m.as_ref()).chain([&model as &dyn Forecaster]).collect();
    let report = compare_report(&ds, &refs, &ds.test, a.threshold);
    eprint!("{}", report.to_text());
    write_json(
        a.output.as_deref(),
        &EvaluateOutput {
            config: &model.config,
            threshold: a.threshold,
            n_test: ds.test.len(),
            report,
        },
    )
}

fn cmd_acf(a: AcfArgs) -> Result<()> {
    let cfg = model_config(&a.cfg)?;
    let records = load_records(&a.input)?;
    let series = build_series(&records, cfg.step_seconds, &cfg.channels[..1])?;
    let max_lag = a.max_lag.unwrap_or((8 * 86_400 / cfg.step_seconds) as usize);
    let mut columns = Vec::new();
    for s in &series {
        match interpolate_missing(s).and_then(|s| autocorrelation(&s.column(0), max_lag)) {
            Ok(acf) => columns.push((s.cell_id.clone(), acf)),
            Err(e) => warn!("cell {}: {e}", s.cell_id),
        }
    }
    if columns.is_empty() {
        return Err(Error::InsufficientData(format!("no cell has more than {max_lag} steps")));
    }
    let mut w = output_writer(a.output.as_deref())?;
    write!(w, "lag,lag_hours,mean")?;
    for (id, _) in &columns {
        write!(w, ",{id}")?;
    }
    writeln!(w)?;
    for lag in 0..=max_lag {
        let mean = columns.iter().map(|c| c.1[lag]).sum::<f64>() / columns.len() as f64;
        write!(w, "{lag},{},{mean:.6}", lag as f64 * cfg.step_seconds as f64 / 3600.0)?;
        for (_, acf) in &columns {
            write!(w, ",{:.6}", acf[lag])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    if !(a.speedup > 0.0) {
        return Err(Error::Config("--speedup must be > 0".into()));
    }
    if a.idle_ttl <= 0 {
        return Err(Error::Config("--idle-ttl must be > 0".into()));
    }
    let engine = Arc::new(Engine::new(EngineOptions {
        idle_ttl_seconds: a.idle_ttl,
        ..EngineOptions::default()
    }));
    engine.reload_from(&a.model)?;
    serve(
        engine,
        &ServeOptions {
            listen_http: a.listen_http,
            listen_ingest: a.listen_ingest,
            listen_firehose: a.listen_firehose,
            input: a.input,
            speedup: a.speedup,
            exit_after_input: a.exit_after_input,
        },
    )
}

/// Predictions at every anchor of every cell, ordered by cell then time.
/// Batch predictions carry `model_version` 0 and zero latency.
pub fn batch_predictions(model: &Model, records: &[CellRecord]) -> Result<Vec<PredictionRecord>> {
    let series = inference_series(records, &model.config.data_spec(), &model.scaler)?;
    let mut out = Vec::new();
    for s in &series {
        for t in model.config.window.valid_anchors(s.len(), 0) {
            let y = model.predict_at(s, t)?;
            out.push(PredictionRecord::new(&s.cell_id, s.ts_at(t), &model.config.output, y, 0, 0.0));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct PredictReport {
    n_test: usize,
    rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kl: Option<f64>,
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let records = load_records(&a.input)?;
    let mut w = output_writer(a.output.as_deref())?;
    match a.split {
        Split::All => {
            if a.report.is_some() {
                return Err(Error::Config("--report requires --split test".into()));
            }
            for p in batch_predictions(&model, &records)? {
                writeln!(w, "{}", p.to_json_line())?;
            }
        }
        Split::Test => {
            let ds = Dataset::prepare_with_scaler(&records, &model.config.data_spec(), &model.scaler)?;
            let mut preds = Vec::with_capacity(ds.test.len());
            for s in &ds.test {
                let y = model.predict_sample(s)?;
                let cell = &ds.cells[s.cell as usize].cell_id;
                let rec = PredictionRecord::new(cell, s.anchor_ts, &model.config.output, y.clone(), 0, 0.0);
                writeln!(w, "{}", rec.to_json_line())?;
                preds.push(y);
            }
            let report = match ds.spec.target_spec()? {
                TargetSpec::Horizons { horizons, .. } => {
                    let mut rows = Vec::new();
                    for (k, &h) in horizons.iter().enumerate() {
                        let y: Vec<f64> = ds.test.iter().map(|s| ds.unscale_target(s.target[k])).collect();
                        let y_hat: Vec<f64> = preds.iter().map(|p| p[k]).collect();
                        let m = Metrics::compute(&y, &y_hat, a.threshold)?;
                        rows.push(ReportRow {
                            algorithm: "deepauto".into(),
                            horizon: h,
                            rmse: m.rmse,
                            mae: m.mae,
                            mape: m.mape,
                        });
                    }
                    PredictReport {
                        n_test: ds.test.len(),
                        rows,
                        kl: None,
                    }
                }
                TargetSpec::Distribution { .. } => {
                    let p: Vec<Vec<f64>> = ds.test.iter().map(|s| s.target.clone()).collect();
                    PredictReport {
                        n_test: ds.test.len(),
                        rows: Vec::new(),
                        kl: Some(kl_eval(&p, &preds)?),
                    }
                }
            };
            if let Some(path) = &a.report {
                write_json(Some(path), &report)?;
            } else {
                eprintln!("{}", serde_json::to_string(&report)?);
            }
        }
    }
    w.flush()?;
    Ok(())
}
