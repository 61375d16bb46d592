//! Everything observable during a run, in the order it happens.

use std::io;

use crate::domain::{
    ConcentratorId, ConcentratorReport, MeterId, MeterMessage, Quantity, ResourceKind, SessionNumber, Timestamp,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    /// Lost on the meter→concentrator radio hop.
    Radio,
    /// Dropped by the concentrator's uplink.
    Uplink,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Radio => "radio",
            DropReason::Uplink => "uplink",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IngestOutcome {
    Accepted,
    Duplicate,
    Stale,
    Conflict,
    Rejected,
    UnknownMeter,
}

impl IngestOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            IngestOutcome::Accepted => "accepted",
            IngestOutcome::Duplicate => "duplicate",
            IngestOutcome::Stale => "stale",
            IngestOutcome::Conflict => "conflict",
            IngestOutcome::Rejected => "rejected",
            IngestOutcome::UnknownMeter => "unknown_meter",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimEvent {
    /// A meter transmitted a quantum event or heartbeat.
    Emitted { time: Timestamp, message: MeterMessage },
    /// A concentrator heard the frame and stamped it.
    Delivery {
        time: Timestamp,
        report: ConcentratorReport,
    },
    Drop {
        time: Timestamp,
        meter: MeterId,
        session: SessionNumber,
        concentrator: ConcentratorId,
        reason: DropReason,
    },
    /// A polled register reading of the baseline system.
    TiReading {
        time: Timestamp,
        meter: MeterId,
        kind: ResourceKind,
        register: Quantity,
        delivered: bool,
    },
    CenterIngest {
        time: Timestamp,
        report: ConcentratorReport,
        outcome: IngestOutcome,
    },
}

impl SimEvent {
    pub fn time(&self) -> Timestamp {
        match self {
            SimEvent::Emitted { time, .. }
            | SimEvent::Delivery { time, .. }
            | SimEvent::Drop { time, .. }
            | SimEvent::TiReading { time, .. }
            | SimEvent::CenterIngest { time, .. } => *time,
        }
    }
}

/// Receives the event stream of a run.
pub trait EventSink {
    fn record(&mut self, event: &SimEvent) -> io::Result<()>;
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn record(&mut self, _: &SimEvent) -> io::Result<()> {
        Ok(())
    }
}

impl EventSink for Vec<SimEvent> {
    fn record(&mut self, event: &SimEvent) -> io::Result<()> {
        self.push(*event);
        Ok(())
    }
}
