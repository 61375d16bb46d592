//! Monitoring center: per-meter ledgers and reconstruction.

pub mod drift;
pub mod ledger;
pub mod profile;
pub mod reconstruct;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{ConcentratorReport, MeterId, Registry};

pub use drift::{correct_drift, Checkpoint, DriftError};
pub use ledger::{AcceptedSession, Anchor, DedupView, IngestError, Ingested, LedgerSnapshot, SessionLedger};
pub use profile::{build_profile, ConsumerProfile, ProfileError};
pub use reconstruct::{
    gap_runs, interpolate_lost_times, quantum_times, reconstruct, GapRun, Interpolation, InterpolationError,
    ReconstructError, ReconstructionResult, Window,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CenterError {
    #[error("report from unregistered meter {0}")]
    UnknownMeter(MeterId),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Counters of ingestion outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CenterStats {
    pub accepted: u64,
    pub duplicates: u64,
    pub stale: u64,
    pub conflicts: u64,
    pub rejected: u64,
    pub unknown_meter: u64,
}

#[derive(Clone, Debug)]
pub struct MonitoringCenter {
    registry: Registry,
    ledgers: BTreeMap<MeterId, SessionLedger>,
    stats: CenterStats,
}

impl MonitoringCenter {
    /// Creates one ledger per registered meter, anchored at its installation.
    pub fn new(registry: Registry) -> Self {
        let ledgers = registry
            .meters()
            .map(|m| {
                let anchor = Anchor {
                    first_session: m.first_session,
                    installed_at: m.installed_at,
                };
                (m.id, SessionLedger::anchored(m.id, anchor))
            })
            .collect();
        MonitoringCenter {
            registry,
            ledgers,
            stats: CenterStats::default(),
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn stats(&self) -> CenterStats {
        self.stats
    }

    pub fn ledger(&self, meter: MeterId) -> Option<&SessionLedger> {
        self.ledgers.get(&meter)
    }

    pub fn ledgers(&self) -> impl Iterator<Item = &SessionLedger> {
        self.ledgers.values()
    }

    pub fn ingest(&mut self, report: &ConcentratorReport) -> Result<Ingested, CenterError> {
        let id = report.message.meter_id;
        let Some(ledger) = self.ledgers.get_mut(&id) else {
            self.stats.unknown_meter += 1;
            return Err(CenterError::UnknownMeter(id));
        };
        let res = ledger.ingest_report(report);
        match &res {
            Ok(Ingested::Accepted) => self.stats.accepted += 1,
            Ok(Ingested::Duplicate) => self.stats.duplicates += 1,
            Err(IngestError::StaleSession(_)) => self.stats.stale += 1,
            Err(IngestError::PayloadConflict(_)) => self.stats.conflicts += 1,
            Err(_) => self.stats.rejected += 1,
        }
        Ok(res?)
    }

    pub fn reconstruct(&self, meter: MeterId, window: Window) -> Result<ReconstructionResult, ReconstructError> {
        let ledger = self.ledgers.get(&meter).ok_or(ReconstructError::NoData(meter))?;
        let quantum = self
            .registry
            .meter(meter)
            .ok_or(ReconstructError::NoData(meter))?
            .quantum;
        reconstruct(ledger, quantum, window)
    }

    pub fn snapshots(&self) -> Vec<LedgerSnapshot> {
        self.ledgers.values().map(SessionLedger::snapshot).collect()
    }
}
