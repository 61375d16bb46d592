//! Files in and out: scenario configs, event logs, ledger snapshots, reports.

pub mod commands;
pub mod config;
pub mod eventlog;
pub mod report;
pub mod units;

pub use config::{default_quanta, default_quantum, load_scenario, parse_scenario, ConfigError, LoadError};
pub use eventlog::{read_ndjson, write_ndjson, EventKind, EventLogRecord, LogError, NdjsonSink};
