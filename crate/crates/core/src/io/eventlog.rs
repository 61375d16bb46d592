//! NDJSON event log: one flat JSON object per line, keys in alphabetical order.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    decode_frame, encode_frame, ConcentratorId, ConcentratorReport, ConcentratorState, ResourceKind, Timestamp,
};
use crate::sim::{EventSink, SimEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    QuantumEvent,
    Heartbeat,
    Delivery,
    Drop,
    TiReading,
    CenterIngest,
}

/// One log line. Fields are declared alphabetically, which is the order
/// serde writes them in; absent fields are omitted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventLogRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentrator_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cumulative_quanta: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivered: Option<bool>,
    /// Hex-encoded wire frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meter_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register_deciunits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<ResourceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_time_ms: Option<i64>,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u32>,
    pub sim_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink_ok: Option<bool>,
}

impl EventLogRecord {
    fn empty(seq: u64, kind: EventKind, time: Timestamp) -> Self {
        EventLogRecord {
            concentrator_id: None,
            cumulative_quanta: None,
            delivered: None,
            frame: None,
            kind,
            meter_id: None,
            outcome: None,
            queue_depth: None,
            reason: None,
            register_deciunits: None,
            resource: None,
            rx_time_ms: None,
            seq,
            session: None,
            sim_time_ms: time.0.max(0) as u64,
            unit: None,
            uplink_ok: None,
        }
    }

    pub fn from_event(seq: u64, ev: &SimEvent) -> Self {
        match *ev {
            SimEvent::Emitted { time, message } => {
                let kind = if message.is_quantum() {
                    EventKind::QuantumEvent
                } else {
                    EventKind::Heartbeat
                };
                EventLogRecord {
                    cumulative_quanta: Some(message.state.cumulative_quanta),
                    frame: Some(hex::encode(encode_frame(&message))),
                    meter_id: Some(message.meter_id.0),
                    resource: Some(message.kind()),
                    session: Some(message.session.0),
                    ..Self::empty(seq, kind, time)
                }
            }
            SimEvent::Delivery { time, report } => EventLogRecord {
                concentrator_id: Some(report.concentrator_id.0),
                meter_id: Some(report.message.meter_id.0),
                rx_time_ms: Some(report.rx_time.0),
                session: Some(report.message.session.0),
                ..Self::empty(seq, EventKind::Delivery, time)
            },
            SimEvent::Drop {
                time,
                meter,
                session,
                concentrator,
                reason,
            } => EventLogRecord {
                concentrator_id: Some(concentrator.0),
                meter_id: Some(meter.0),
                reason: Some(reason.as_str().to_string()),
                session: Some(session.0),
                ..Self::empty(seq, EventKind::Drop, time)
            },
            SimEvent::TiReading {
                time,
                meter,
                kind,
                register,
                delivered,
            } => EventLogRecord {
                delivered: Some(delivered),
                meter_id: Some(meter.0),
                register_deciunits: Some(register.deciunits()),
                resource: Some(kind),
                unit: Some(kind.base_unit().to_string()),
                ..Self::empty(seq, EventKind::TiReading, time)
            },
            SimEvent::CenterIngest { time, report, outcome } => EventLogRecord {
                concentrator_id: Some(report.concentrator_id.0),
                frame: Some(hex::encode(encode_frame(&report.message))),
                meter_id: Some(report.message.meter_id.0),
                outcome: Some(outcome.as_str().to_string()),
                queue_depth: Some(report.concentrator_state.queue_depth),
                rx_time_ms: Some(report.rx_time.0),
                session: Some(report.message.session.0),
                uplink_ok: Some(report.concentrator_state.uplink_ok),
                ..Self::empty(seq, EventKind::CenterIngest, time)
            },
        }
    }

    /// The concentrator report carried by a `center_ingest` record.
    pub fn report(&self) -> Result<Option<ConcentratorReport>, LogError> {
        if self.kind != EventKind::CenterIngest {
            return Ok(None);
        }
        let missing = |f: &str| LogError::Record {
            seq: self.seq,
            msg: format!("missing field {f}"),
        };
        let frame = self.frame.as_deref().ok_or_else(|| missing("frame"))?;
        let bytes = hex::decode(frame).map_err(|e| LogError::Record {
            seq: self.seq,
            msg: e.to_string(),
        })?;
        let message = decode_frame(&bytes).map_err(|e| LogError::Record {
            seq: self.seq,
            msg: e.to_string(),
        })?;
        Ok(Some(ConcentratorReport {
            message,
            concentrator_id: ConcentratorId(self.concentrator_id.ok_or_else(|| missing("concentrator_id"))?),
            rx_time: Timestamp(self.rx_time_ms.ok_or_else(|| missing("rx_time_ms"))?),
            concentrator_state: ConcentratorState {
                uplink_ok: self.uplink_ok.unwrap_or(true),
                queue_depth: self.queue_depth.unwrap_or(0),
            },
        }))
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("record seq {seq}: {msg}")]
    Record { seq: u64, msg: String },
}

/// Writes every event as one NDJSON line, numbering them from 0.
pub struct NdjsonSink<W: Write> {
    out: W,
    seq: u64,
}

impl<W: Write> NdjsonSink<W> {
    pub fn new(out: W) -> Self {
        NdjsonSink { out, seq: 0 }
    }

    pub fn records_written(&self) -> u64 {
        self.seq
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for NdjsonSink<W> {
    fn record(&mut self, event: &SimEvent) -> io::Result<()> {
        let rec = EventLogRecord::from_event(self.seq, event);
        serde_json::to_writer(&mut self.out, &rec)?;
        self.out.write_all(b"\n")?;
        self.seq += 1;
        Ok(())
    }
}

/// Reads an NDJSON file of records or snapshots, one per non-empty line.
pub fn read_ndjson<T: for<'de> Deserialize<'de>>(input: impl BufRead) -> Result<Vec<T>, LogError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| LogError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

/// Writes values as NDJSON, one per line.
pub fn write_ndjson<T: Serialize>(mut out: impl Write, items: &[T]) -> io::Result<()> {
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
