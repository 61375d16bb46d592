use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ids::{ConcentratorId, DeviceId, MeterId, SessionNumber};
use super::kind::{Quantum, ResourceKind};
use super::units::Timestamp;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("duplicate meter id {0}")]
    DuplicateMeter(MeterId),
    #[error("duplicate concentrator id {0}")]
    DuplicateConcentrator(ConcentratorId),
}

/// What the center knows about an installed meter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeterRecord {
    pub id: MeterId,
    pub kind: ResourceKind,
    pub quantum: Quantum,
    pub installed_at: Timestamp,
    /// Session number of the first message the meter will ever send.
    pub first_session: SessionNumber,
}

/// Installed meters and concentrators, keyed by namespaced id.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    meters: BTreeMap<MeterId, MeterRecord>,
    concentrators: BTreeSet<ConcentratorId>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_meter(&mut self, record: MeterRecord) -> Result<(), RegistryError> {
        if self.meters.contains_key(&record.id) {
            return Err(RegistryError::DuplicateMeter(record.id));
        }
        self.meters.insert(record.id, record);
        Ok(())
    }

    pub fn add_concentrator(&mut self, id: ConcentratorId) -> Result<(), RegistryError> {
        if !self.concentrators.insert(id) {
            return Err(RegistryError::DuplicateConcentrator(id));
        }
        Ok(())
    }

    pub fn meter(&self, id: MeterId) -> Option<&MeterRecord> {
        self.meters.get(&id)
    }

    pub fn meters(&self) -> impl Iterator<Item = &MeterRecord> {
        self.meters.values()
    }

    pub fn concentrators(&self) -> impl Iterator<Item = ConcentratorId> + '_ {
        self.concentrators.iter().copied()
    }

    pub fn contains(&self, id: DeviceId) -> bool {
        match id {
            DeviceId::Meter(m) => self.meters.contains_key(&m),
            DeviceId::Concentrator(c) => self.concentrators.contains(&c),
        }
    }

    pub fn meter_count(&self) -> usize {
        self.meters.len()
    }
}
