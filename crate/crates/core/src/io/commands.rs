//! The four CLI commands, callable without a process boundary.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::center::{LedgerSnapshot, MonitoringCenter};
use crate::domain::Quantum;
use crate::sim::{detail_sweep, run, Mode, RunOptions, Scenario, SimError, SweepPoint, SweepValue};

use super::config::{load_scenario, ConfigError, LoadError};
use super::eventlog::{read_ndjson, write_ndjson, EventLogRecord, LogError, NdjsonSink};
use super::report::{write_compare, write_metrics, write_sweep, CompareRow};
use super::units::{parse_duration, parse_quantity};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "RI_SIM_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Log { path: String, source: LogError },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
}

impl CliError {
    /// 2 for bad input, 1 for IO failures, 3 for a failed replay check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Log { .. } | CliError::Csv { .. } => 1,
            CliError::ReplayMismatch(_) => 3,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { path, source } => CliError::Io { path, source },
            LoadError::Config(c) => CliError::Config(c),
        }
    }
}

fn sim_err(e: SimError, out: &Path) -> CliError {
    match e {
        SimError::Scenario(s) => CliError::Config(ConfigError::Scenario(s)),
        SimError::Io(source) => CliError::Io {
            path: out.display().to_string(),
            source,
        },
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Seed precedence: environment, then flag, then config file.
pub fn resolve_seed(flag: Option<u64>, env: Option<String>) -> Result<Option<u64>, CliError> {
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        None => Ok(flag),
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut sc = load_scenario(config)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeArg {
    Ri,
    Ti,
    Both,
}

pub struct RunArgs {
    pub config: PathBuf,
    pub mode: Option<ModeArg>,
    pub dt: Option<String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct RunSummary {
    pub events: u64,
    pub meters: usize,
    pub events_path: PathBuf,
    pub ledgers_path: PathBuf,
    pub metrics_path: PathBuf,
}

fn apply_mode(sc: &mut Scenario, mode: Option<ModeArg>, dt: Option<&str>) -> Result<(), CliError> {
    let dt_ms = dt
        .map(|d| {
            parse_duration(d)
                .map_err(|e| CliError::Usage(format!("--dt: {e}")))
                .and_then(|ms| {
                    if ms > 0 {
                        Ok(ms)
                    } else {
                        Err(CliError::Usage("--dt must be positive".into()))
                    }
                })
        })
        .transpose()?
        .or(sc.mode.poll_interval());
    let need_dt = || dt_ms.ok_or_else(|| CliError::Usage("--dt is required for ti/both".into()));
    sc.mode = match mode {
        None => match (sc.mode, dt_ms) {
            (Mode::Ti { .. }, Some(dt_ms)) => Mode::Ti { dt_ms },
            (Mode::Both { .. }, Some(dt_ms)) => Mode::Both { dt_ms },
            (m, _) => m,
        },
        Some(ModeArg::Ri) => Mode::Ri,
        Some(ModeArg::Ti) => Mode::Ti { dt_ms: need_dt()? },
        Some(ModeArg::Both) => Mode::Both { dt_ms: need_dt()? },
    };
    Ok(())
}

/// Writes events.ndjson, ledgers.ndjson and metrics.csv under `out`.
pub fn cmd_run(args: &RunArgs) -> Result<RunSummary, CliError> {
    let mut sc = load(&args.config, args.seed)?;
    apply_mode(&mut sc, args.mode, args.dt.as_deref())?;
    ensure_dir(&args.out)?;
    let events_path = args.out.join("events.ndjson");
    let ledgers_path = args.out.join("ledgers.ndjson");
    let metrics_path = args.out.join("metrics.csv");

    let mut sink = NdjsonSink::new(create(&events_path)?);
    let opts = RunOptions {
        record_truth: false,
        ..RunOptions::default()
    };
    let outcome = run(&sc, &mut sink, opts).map_err(|e| sim_err(e, &events_path))?;
    let events = sink.records_written();
    sink.into_inner().flush().map_err(io_err(&events_path))?;

    let snapshots: Vec<LedgerSnapshot> = outcome
        .ri
        .as_ref()
        .and_then(|ri| ri.center.as_ref())
        .map(MonitoringCenter::snapshots)
        .unwrap_or_default();
    write_ndjson(create(&ledgers_path)?, &snapshots).map_err(io_err(&ledgers_path))?;
    let mut metrics = create(&metrics_path)?;
    write_metrics(&mut metrics, &outcome).map_err(csv_err(&metrics_path))?;
    metrics.flush().map_err(io_err(&metrics_path))?;

    Ok(RunSummary {
        events,
        meters: sc.meters.len(),
        events_path,
        ledgers_path,
        metrics_path,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Dr,
    Dt,
}

pub struct SweepArgs {
    pub config: PathBuf,
    pub param: SweepParam,
    pub values: String,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Parses a comma-separated sweep list against the scenario's meters.
/// ΔR values are either absolute ("50 ml") or factors of each meter's own
/// quantum ("0.5x").
pub fn parse_sweep_values(sc: &Scenario, param: SweepParam, values: &str) -> Result<Vec<SweepPoint>, CliError> {
    let tokens: Vec<&str> = values.split(',').map(str::trim).collect();
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(CliError::Usage(format!("--values '{values}' has an empty entry")));
    }
    tokens
        .into_iter()
        .map(|tok| {
            let bad = |msg: String| CliError::Usage(format!("--values entry '{tok}': {msg}"));
            let value = match param {
                SweepParam::Dt => {
                    let ms = parse_duration(tok).map_err(|e| bad(e.to_string()))?;
                    if ms <= 0 {
                        return Err(bad("must be positive".into()));
                    }
                    SweepValue::PollInterval { ms }
                }
                SweepParam::Dr => match tok.strip_suffix(['x', '×']) {
                    Some(f) => {
                        let f: f64 = f.trim().parse().map_err(|_| bad("not a number".into()))?;
                        if !(f.is_finite() && f > 0.0) {
                            return Err(bad("factor must be positive".into()));
                        }
                        SweepValue::QuantumFactor(f)
                    }
                    None => SweepValue::Quanta(
                        sc.meters
                            .iter()
                            .map(|m| {
                                let q = parse_quantity(m.config.kind, tok)
                                    .map_err(|e| bad(format!("meter {}: {e}", m.config.id)))?;
                                Quantum::new(q).ok_or_else(|| bad("must be positive".into()))
                            })
                            .collect::<Result<_, _>>()?,
                    ),
                },
            };
            Ok(SweepPoint {
                label: tok.to_string(),
                value,
            })
        })
        .collect()
}

/// Writes sweep.csv under `out`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<PathBuf, CliError> {
    let sc = load(&args.config, args.seed)?;
    let points = parse_sweep_values(&sc, args.param, &args.values)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("sweep.csv");
    let rows = detail_sweep(&sc, &points).map_err(|e| sim_err(e, &path))?;
    let mut f = create(&path)?;
    write_sweep(&mut f, &rows).map_err(csv_err(&path))?;
    f.flush().map_err(io_err(&path))?;
    Ok(path)
}

pub struct CompareArgs {
    pub config: PathBuf,
    pub dt: String,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Runs Ri and Ti on the same traces and channel seed.
pub fn compare(sc: &Scenario, dt_ms: i64) -> Result<Vec<CompareRow>, SimError> {
    let both = Scenario {
        mode: Mode::Both { dt_ms },
        ..sc.clone()
    };
    let opts = RunOptions {
        record_truth: false,
        ..RunOptions::default()
    };
    let out = run(&both, &mut crate::sim::NullSink, opts)?;
    let ri = out.ri.expect("both modes");
    let ti = out.ti.expect("both modes");
    Ok(vec![
        CompareRow::new("ri", None, &ri.metrics, sc.horizon_ms),
        CompareRow::new("ti", Some(dt_ms), &ti.metrics, sc.horizon_ms),
    ])
}

/// Writes compare.csv under `out`.
pub fn cmd_compare(args: &CompareArgs) -> Result<(PathBuf, Vec<CompareRow>), CliError> {
    let sc = load(&args.config, args.seed)?;
    let dt_ms = parse_duration(&args.dt).map_err(|e| CliError::Usage(format!("--dt: {e}")))?;
    if dt_ms <= 0 {
        return Err(CliError::Usage("--dt must be positive".into()));
    }
    ensure_dir(&args.out)?;
    let path = args.out.join("compare.csv");
    let rows = compare(&sc, dt_ms).map_err(|e| sim_err(e, &path))?;
    let mut f = create(&path)?;
    write_compare(&mut f, &rows).map_err(csv_err(&path))?;
    f.flush().map_err(io_err(&path))?;
    Ok((path, rows))
}

pub struct ReplayArgs {
    pub config: PathBuf,
    pub events: PathBuf,
    pub ledgers: PathBuf,
}

#[derive(Debug, PartialEq, Eq)]
pub struct ReplaySummary {
    pub ingested: u64,
    pub ledgers: usize,
}

fn read_file<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    read_ndjson(BufReader::new(f)).map_err(|source| CliError::Log {
        path: path.display().to_string(),
        source,
    })
}

/// Re-ingests every `center_ingest` record of an event log into a fresh
/// center and checks the result against the saved ledgers.
pub fn cmd_replay(args: &ReplayArgs) -> Result<ReplaySummary, CliError> {
    let sc = load_scenario(&args.config)?;
    let registry = sc.registry().map_err(|e| CliError::Config(ConfigError::Scenario(e)))?;
    let records: Vec<EventLogRecord> = read_file(&args.events)?;
    let expected: Vec<LedgerSnapshot> = read_file(&args.ledgers)?;

    let mut center = MonitoringCenter::new(registry);
    let mut ingested = 0;
    let mut last_seq = None;
    for rec in &records {
        if last_seq.is_some_and(|s| rec.seq <= s) {
            return Err(CliError::ReplayMismatch(format!("seq {} out of order", rec.seq)));
        }
        last_seq = Some(rec.seq);
        let report = rec.report().map_err(|source| CliError::Log {
            path: args.events.display().to_string(),
            source,
        })?;
        if let Some(report) = report {
            // outcome is re-derived; rejected reports simply fail again
            let _ = center.ingest(&report);
            ingested += 1;
        }
    }
    let got = center.snapshots();
    if got.len() != expected.len() {
        return Err(CliError::ReplayMismatch(format!(
            "{} ledgers replayed, {} saved",
            got.len(),
            expected.len()
        )));
    }
    for (g, e) in got.iter().zip(&expected) {
        if g != e {
            return Err(CliError::ReplayMismatch(format!(
                "ledger of meter M{} differs",
                e.meter_id
            )));
        }
    }
    Ok(ReplaySummary {
        ingested,
        ledgers: got.len(),
    })
}
