//! In-memory description of one simulation run.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::concentrator::{ConcentratorConfig, TopologyError, VisibilityMap};
use crate::domain::units::MS_PER_MINUTE;
use crate::domain::{ConcentratorId, MeterId, MeterRecord, Registry, RegistryError, SessionNumber, Timestamp};
use crate::meter::{MeterConfig, MeterConfigError, QualityModel};

use super::trace::{generate_trace, ConsumptionTrace, TraceError, TraceSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("meter {meter}: {source}")]
    Meter { meter: MeterId, source: MeterConfigError },
    #[error("meter {meter}: {source}")]
    Trace { meter: MeterId, source: TraceError },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("horizon must not be negative")]
    NegativeHorizon,
    #[error("polling interval must be positive, got {0} ms")]
    PollInterval(i64),
    #[error("detail grid must be positive, got {0} ms")]
    Grid(i64),
    #[error("scenario has no meters")]
    NoMeters,
    #[error("invalid sweep value: {0}")]
    SweepValue(String),
}

/// Which metering systems a run simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Ri,
    /// Polling every `dt_ms`.
    Ti {
        dt_ms: i64,
    },
    Both {
        dt_ms: i64,
    },
}

impl Mode {
    pub fn includes_ri(self) -> bool {
        matches!(self, Mode::Ri | Mode::Both { .. })
    }

    pub fn poll_interval(self) -> Option<i64> {
        match self {
            Mode::Ri => None,
            Mode::Ti { dt_ms } | Mode::Both { dt_ms } => Some(dt_ms),
        }
    }
}

/// Where a meter's ground truth comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceSource {
    Generated { spec: TraceSpec, seed: u64 },
    Fixed(ConsumptionTrace),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeterSetup {
    pub config: MeterConfig,
    pub trace: TraceSource,
    pub quality: QualityModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    /// Seeds the channel: every loss draw comes from this stream.
    pub seed: u64,
    pub horizon_ms: i64,
    pub meters: Vec<MeterSetup>,
    pub concentrators: Vec<ConcentratorConfig>,
    pub visibility: VisibilityMap,
    pub mode: Mode,
    pub uplink_delay_ms: i64,
    pub max_skew_ms: i64,
    /// Spacing of the grid the detail metric is sampled on.
    pub grid_ms: i64,
}

pub const DEFAULT_GRID_MS: i64 = MS_PER_MINUTE;
pub const DEFAULT_MAX_SKEW_MS: i64 = 1_000;

impl Scenario {
    pub fn new(seed: u64, horizon_ms: i64) -> Self {
        Scenario {
            seed,
            horizon_ms,
            meters: Vec::new(),
            concentrators: Vec::new(),
            visibility: VisibilityMap::new(),
            mode: Mode::Ri,
            uplink_delay_ms: 0,
            max_skew_ms: DEFAULT_MAX_SKEW_MS,
            grid_ms: DEFAULT_GRID_MS,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.horizon_ms < 0 {
            return Err(ScenarioError::NegativeHorizon);
        }
        if self.meters.is_empty() {
            return Err(ScenarioError::NoMeters);
        }
        if self.grid_ms <= 0 {
            return Err(ScenarioError::Grid(self.grid_ms));
        }
        if let Some(dt) = self.mode.poll_interval() {
            if dt <= 0 {
                return Err(ScenarioError::PollInterval(dt));
            }
        }
        for m in &self.meters {
            m.config.validate().map_err(|source| ScenarioError::Meter {
                meter: m.config.id,
                source,
            })?;
            if let TraceSource::Generated { spec, .. } = &m.trace {
                spec.validate().map_err(|source| ScenarioError::Trace {
                    meter: m.config.id,
                    source,
                })?;
            }
        }
        for c in &self.concentrators {
            c.validate(self.max_skew_ms)?;
        }
        self.registry()?;
        let conc: BTreeSet<ConcentratorId> = self.concentrators.iter().map(|c| c.id).collect();
        self.visibility
            .validate(self.meters.iter().map(|m| m.config.id), &conc)?;
        Ok(())
    }

    /// Registry as the center sees it: every meter installed at time zero.
    pub fn registry(&self) -> Result<Registry, ScenarioError> {
        let mut reg = Registry::new();
        for m in &self.meters {
            reg.add_meter(MeterRecord {
                id: m.config.id,
                kind: m.config.kind,
                quantum: m.config.quantum,
                installed_at: Timestamp::ZERO,
                first_session: SessionNumber(0),
            })?;
        }
        for c in &self.concentrators {
            reg.add_concentrator(c.id)?;
        }
        Ok(reg)
    }

    /// Ground-truth traces in meter order.
    pub fn traces(&self) -> Result<Vec<ConsumptionTrace>, ScenarioError> {
        self.meters
            .iter()
            .map(|m| match &m.trace {
                TraceSource::Generated { spec, seed } => generate_trace(spec, m.config.id, self.horizon_ms, *seed)
                    .map_err(|source| ScenarioError::Trace {
                        meter: m.config.id,
                        source,
                    }),
                TraceSource::Fixed(t) => Ok(t.clone().with_meter_id(m.config.id)),
            })
            .collect()
    }
}
