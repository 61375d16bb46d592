//! CSV reports (RFC 4180, header row first).

use std::io::Write;

use serde::Serialize;

use crate::center::{ReconstructionResult, Window};
use crate::domain::units::MS_PER_DAY;
use crate::domain::Timestamp;
use crate::sim::{DetailMetric, MeterMetric, RunOutcome, SweepRow};

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        String::new()
    }
}

#[derive(Serialize)]
struct MetricsRow {
    system: &'static str,
    meter_id: u64,
    kind: &'static str,
    message_count: u64,
    bytes_sent: u64,
    rmse: String,
    window_start_ms: Option<i64>,
    window_end_ms: Option<i64>,
    quanta_received: Option<u64>,
    quanta_recovered: Option<u64>,
    amount_deciunits: Option<u64>,
    trailing_uncertainty_deciunits: Option<u64>,
    unit: &'static str,
}

impl MetricsRow {
    fn new(system: &'static str, m: &MeterMetric, rec: Option<&ReconstructionResult>) -> Self {
        MetricsRow {
            system,
            meter_id: m.meter_id.0,
            kind: m.kind.name(),
            message_count: m.detail.message_count,
            bytes_sent: m.detail.bytes_sent,
            rmse: fmt_f64(m.detail.rmse),
            window_start_ms: rec.map(|r| r.window.start.0),
            window_end_ms: rec.map(|r| r.window.end.0),
            quanta_received: rec.map(|r| r.quanta_received),
            quanta_recovered: rec.map(|r| r.quanta_recovered),
            amount_deciunits: rec.map(|r| r.amount.deciunits()),
            trailing_uncertainty_deciunits: rec.map(|r| r.trailing_uncertainty.deciunits()),
            unit: m.kind.base_unit(),
        }
    }
}

/// Per-meter metrics; Ri rows carry the full-horizon reconstruction.
pub fn write_metrics(out: impl Write, outcome: &RunOutcome) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let window = Window::new(Timestamp::ZERO, Timestamp(outcome.horizon_ms));
    let mut wrote = false;
    if let Some(ri) = &outcome.ri {
        for m in &ri.metrics {
            let rec = ri.center.as_ref().and_then(|c| c.reconstruct(m.meter_id, window).ok());
            w.serialize(MetricsRow::new("ri", m, rec.as_ref()))?;
            wrote = true;
        }
    }
    if let Some(ti) = &outcome.ti {
        for m in &ti.metrics {
            w.serialize(MetricsRow::new("ti", m, None))?;
            wrote = true;
        }
    }
    if !wrote {
        w.write_record(METRICS_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

const METRICS_HEADER: [&str; 13] = [
    "system",
    "meter_id",
    "kind",
    "message_count",
    "bytes_sent",
    "rmse",
    "window_start_ms",
    "window_end_ms",
    "quanta_received",
    "quanta_recovered",
    "amount_deciunits",
    "trailing_uncertainty_deciunits",
    "unit",
];

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    value: &'a str,
    rmse: String,
    message_count: u64,
    bytes_sent: u64,
}

pub fn write_sweep(out: impl Write, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(SweepCsvRow {
            value: &r.label,
            rmse: fmt_f64(r.detail.rmse),
            message_count: r.detail.message_count,
            bytes_sent: r.detail.bytes_sent,
        })?;
    }
    if rows.is_empty() {
        w.write_record(["value", "rmse", "message_count", "bytes_sent"])?;
    }
    w.flush()?;
    Ok(())
}

/// One side of a Ri/Ti comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub system: &'static str,
    pub dt_ms: Option<i64>,
    pub detail: DetailMetric,
    /// Mean extrapolated battery life over meters that spent any charge.
    pub battery_lifetime_days: Option<f64>,
}

impl CompareRow {
    pub fn new(system: &'static str, dt_ms: Option<i64>, metrics: &[MeterMetric], horizon_ms: i64) -> Self {
        let lifetimes: Vec<f64> = metrics
            .iter()
            .filter_map(|m| m.lifetime_estimate_ms(horizon_ms))
            .map(|ms| ms / MS_PER_DAY as f64)
            .collect();
        CompareRow {
            system,
            dt_ms,
            detail: DetailMetric::aggregate(metrics.iter().map(|m| &m.detail)),
            battery_lifetime_days: (!lifetimes.is_empty())
                .then(|| lifetimes.iter().sum::<f64>() / lifetimes.len() as f64),
        }
    }
}

#[derive(Serialize)]
struct CompareCsvRow {
    system: &'static str,
    dt_ms: Option<i64>,
    message_count: u64,
    bytes_sent: u64,
    rmse: String,
    battery_lifetime_days: String,
}

pub fn write_compare(out: impl Write, rows: &[CompareRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CompareCsvRow {
            system: r.system,
            dt_ms: r.dt_ms,
            message_count: r.detail.message_count,
            bytes_sent: r.detail.bytes_sent,
            rmse: fmt_f64(r.detail.rmse),
            battery_lifetime_days: r.battery_lifetime_days.map(|d| format!("{d:.3}")).unwrap_or_default(),
        })?;
    }
    w.flush()?;
    Ok(())
}
