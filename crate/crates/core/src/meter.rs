//! Meter state machine.
//!
//! A meter accumulates consumed resource and transmits one frame each time a
//! quantum ΔR has passed. If nothing is sent for `heartbeat_interval` it sends
//! a state-only heartbeat. Meters never receive anything.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::domain::units::{MS_PER_DAY, MS_PER_HOUR};
use crate::domain::{
    frame_len, Amount, BatteryLevel, MessageType, MeterId, MeterMessage, MeterState, QualityVector, Quantum, Rate,
    ResourceKind, SessionNumber, StateFlags, Timestamp,
};
use crate::sim::trace::ConsumptionTrace;

pub const DEFAULT_HEARTBEAT_MS: i64 = 24 * MS_PER_HOUR;

#[derive(Debug, Error, PartialEq)]
pub enum MeterConfigError {
    #[error("meter {0}: heartbeat interval must be positive")]
    HeartbeatInterval(MeterId),
    #[error("meter {0}: tx_cost must be positive")]
    TxCost(MeterId),
    #[error("meter {0}: battery capacity must be positive")]
    Capacity(MeterId),
    #[error("meter {0}: idle drain must be non-negative")]
    IdleDrain(MeterId),
    #[error("meter {0}: drift parameters must be finite, drift_rate >= 0 and drift_offset > -1")]
    Drift(MeterId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeterConfig {
    pub id: MeterId,
    pub kind: ResourceKind,
    pub quantum: Quantum,
    pub heartbeat_interval_ms: i64,
    /// Energy units available at installation.
    pub battery_capacity: f64,
    /// Energy per transmitted frame.
    pub tx_cost: f64,
    /// Energy per hour spent regardless of traffic.
    pub idle_drain_per_hour: f64,
    /// Relative quantum inflation per registered quantum.
    pub drift_rate: f64,
    /// Constant relative quantum inflation (0.1 = meter needs 110% of ΔR per event).
    pub drift_offset: f64,
    /// Highest flow the meter can pass.
    pub max_flow: Rate,
    /// Keep registering consumption after the battery dies (nothing is sent either way).
    pub count_when_dead: bool,
}

impl MeterConfig {
    pub fn new(id: MeterId, kind: ResourceKind) -> Self {
        MeterConfig {
            id,
            kind,
            quantum: Quantum::default_for(kind),
            heartbeat_interval_ms: DEFAULT_HEARTBEAT_MS,
            battery_capacity: 1e6,
            tx_cost: 1.0,
            idle_drain_per_hour: 0.0,
            drift_rate: 0.0,
            drift_offset: 0.0,
            max_flow: default_max_flow(kind),
            count_when_dead: false,
        }
    }

    pub fn validate(&self) -> Result<(), MeterConfigError> {
        if self.heartbeat_interval_ms <= 0 {
            return Err(MeterConfigError::HeartbeatInterval(self.id));
        }
        if !(self.tx_cost > 0.0 && self.tx_cost.is_finite()) {
            return Err(MeterConfigError::TxCost(self.id));
        }
        if !(self.battery_capacity > 0.0 && self.battery_capacity.is_finite()) {
            return Err(MeterConfigError::Capacity(self.id));
        }
        if !(self.idle_drain_per_hour >= 0.0 && self.idle_drain_per_hour.is_finite()) {
            return Err(MeterConfigError::IdleDrain(self.id));
        }
        if !(self.drift_rate >= 0.0
            && self.drift_rate.is_finite()
            && self.drift_offset > -1.0
            && self.drift_offset.is_finite())
        {
            return Err(MeterConfigError::Drift(self.id));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        frame_len(self.kind)
    }
}

/// Typical apartment maximum: 12 L/min water, 14.4 kW electricity, 12 000 kcal/h heat,
/// 2.4 m³/h gas.
pub fn default_max_flow(kind: ResourceKind) -> Rate {
    let base_per_hour: u64 = match kind {
        ResourceKind::ColdWater | ResourceKind::HotWater => 720_000,
        ResourceKind::Electricity => 14_400,
        ResourceKind::Heat => 12_000,
        ResourceKind::Gas => 2_400,
        ResourceKind::GenericSensor => 3_600,
    };
    Rate(base_per_hour * 10)
}

/// Mutable part of a meter, advanced by value.
#[derive(Clone, Debug, PartialEq)]
pub struct MeterRuntime {
    residual: Amount,
    next_session: SessionNumber,
    last_tx_time: Timestamp,
    battery_remaining: f64,
    cumulative_quanta: u64,
    clock: Timestamp,
    depleted_at: Option<Timestamp>,
    flags: StateFlags,
}

impl MeterRuntime {
    /// Fresh meter: empty residual, session 0, full battery.
    pub fn install(cfg: &MeterConfig, at: Timestamp) -> Self {
        MeterRuntime {
            residual: Amount::ZERO,
            next_session: SessionNumber(0),
            last_tx_time: at,
            battery_remaining: cfg.battery_capacity,
            cumulative_quanta: 0,
            clock: at,
            depleted_at: None,
            flags: StateFlags::empty(),
        }
    }

    pub fn residual(&self) -> Amount {
        self.residual
    }

    pub fn next_session(&self) -> SessionNumber {
        self.next_session
    }

    pub fn last_tx_time(&self) -> Timestamp {
        self.last_tx_time
    }

    pub fn battery_remaining(&self) -> f64 {
        self.battery_remaining
    }

    pub fn cumulative_quanta(&self) -> u64 {
        self.cumulative_quanta
    }

    pub fn depleted_at(&self) -> Option<Timestamp> {
        self.depleted_at
    }

    pub fn is_dead(&self) -> bool {
        self.battery_remaining <= 0.0
    }

    pub fn battery_level(&self, cfg: &MeterConfig) -> BatteryLevel {
        BatteryLevel::from_fraction(self.battery_remaining / cfg.battery_capacity)
    }

    pub fn set_flags(mut self, flags: StateFlags) -> Self {
        self.flags = flags;
        self
    }

    /// Applies idle drain up to `now`.
    fn advance_clock(&mut self, cfg: &MeterConfig, now: Timestamp) {
        if now <= self.clock {
            return;
        }
        if cfg.idle_drain_per_hour > 0.0 && !self.is_dead() {
            let hours = now.since(self.clock) as f64 / MS_PER_HOUR as f64;
            let drain = cfg.idle_drain_per_hour * hours;
            if drain >= self.battery_remaining {
                let ms = (self.battery_remaining / cfg.idle_drain_per_hour * MS_PER_HOUR as f64).ceil();
                self.depleted_at = Some(self.clock.plus(ms as i64).min(now));
                self.battery_remaining = 0.0;
            } else {
                self.battery_remaining -= drain;
            }
        }
        self.clock = now;
    }

    fn transmit(
        &mut self,
        cfg: &MeterConfig,
        message_type: MessageType,
        quality: QualityVector,
        now: Timestamp,
    ) -> MeterMessage {
        let session = self.next_session;
        self.next_session = session.next();
        self.last_tx_time = now;
        self.battery_remaining -= cfg.tx_cost;
        if self.battery_remaining <= 0.0 {
            self.battery_remaining = 0.0;
            self.depleted_at = Some(now);
        }
        MeterMessage {
            meter_id: cfg.id,
            session,
            message_type,
            quality,
            state: MeterState {
                battery: self.battery_level(cfg),
                flags: self.flags,
                cumulative_quanta: self.cumulative_quanta as u32,
            },
        }
    }

    /// Quantum actually needed for the next event, including drift.
    pub fn effective_quantum(&self, cfg: &MeterConfig) -> Amount {
        effective_quantum(cfg, self)
    }

    /// Consumption still needed before the next quantum event, or `None` if the
    /// meter can no longer transmit.
    pub fn amount_to_next_quantum(&self, cfg: &MeterConfig) -> Option<Amount> {
        if self.is_dead() {
            return None;
        }
        Some(self.effective_quantum(cfg) - self.residual)
    }

    /// Registers `amount` of consumption at `now`, returning one quantum-event
    /// message per full effective quantum accumulated.
    pub fn ingest_flow(
        mut self,
        cfg: &MeterConfig,
        amount: Amount,
        now: Timestamp,
        quality: QualityVector,
    ) -> (Self, Vec<MeterMessage>) {
        self.advance_clock(cfg, now);
        let mut out = Vec::new();
        if self.is_dead() {
            if cfg.count_when_dead {
                self.residual += amount;
                self.register_silently(cfg);
            }
            return (self, out);
        }
        self.residual += amount;
        loop {
            let q = self.effective_quantum(cfg);
            if self.residual < q {
                break;
            }
            if self.is_dead() {
                if cfg.count_when_dead {
                    self.register_silently(cfg);
                } else {
                    // unpowered sensor: whatever had not been sent is gone
                    self.residual = Amount(self.residual.0 % q.0);
                }
                break;
            }
            self.residual -= q;
            self.cumulative_quanta += 1;
            out.push(self.transmit(cfg, MessageType::QuantumEvent, quality, now));
        }
        (self, out)
    }

    fn register_silently(&mut self, cfg: &MeterConfig) {
        loop {
            let q = self.effective_quantum(cfg);
            if self.residual < q {
                break;
            }
            self.residual -= q;
            self.cumulative_quanta += 1;
        }
    }

    /// Emits a heartbeat if nothing has been sent for a full interval.
    pub fn heartbeat_check(
        mut self,
        cfg: &MeterConfig,
        now: Timestamp,
        quality: QualityVector,
    ) -> (Self, Option<MeterMessage>) {
        self.advance_clock(cfg, now);
        if self.is_dead() || now.since(self.last_tx_time) < cfg.heartbeat_interval_ms {
            return (self, None);
        }
        let msg = self.transmit(cfg, MessageType::Heartbeat, quality, now);
        (self, Some(msg))
    }
}

/// ΔR·(1 + drift_offset + drift_rate·cumulative_quanta), exactly ΔR without drift.
pub fn effective_quantum(cfg: &MeterConfig, rt: &MeterRuntime) -> Amount {
    let nominal = cfg.quantum.delta_r().to_amount();
    if cfg.drift_rate == 0.0 && cfg.drift_offset == 0.0 {
        return nominal;
    }
    let factor = 1.0 + cfg.drift_offset + cfg.drift_rate * rt.cumulative_quanta as f64;
    Amount(((nominal.0 as f64) * factor).round().max(1.0) as u128)
}

/// Quality readings sampled at emission time: a nominal vector with a daily swing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityModel {
    base: QualityVector,
    swing: [i16; 2],
}

impl QualityModel {
    pub fn new(base: QualityVector, swing: [i16; 2]) -> Self {
        QualityModel { base, swing }
    }

    pub fn nominal(kind: ResourceKind) -> Self {
        let swing = match kind {
            ResourceKind::ColdWater | ResourceKind::HotWater | ResourceKind::Heat => [20, 0],
            ResourceKind::Electricity => [30, 0],
            ResourceKind::Gas => [30, 0],
            ResourceKind::GenericSensor => [0, 0],
        };
        QualityModel {
            base: QualityVector::nominal(kind),
            swing,
        }
    }

    pub fn constant(base: QualityVector) -> Self {
        QualityModel { base, swing: [0, 0] }
    }

    pub fn sample(&self, t: Timestamp) -> QualityVector {
        if self.swing == [0, 0] {
            return self.base;
        }
        let phase = (t.0.rem_euclid(MS_PER_DAY)) as f64 / MS_PER_DAY as f64;
        let s = (TAU * phase).sin();
        let vals: Vec<i16> = self
            .base
            .deciunits()
            .iter()
            .zip(self.swing)
            .map(|(&b, sw)| {
                (b as f64 + sw as f64 * s)
                    .round()
                    .clamp(i16::MIN as f64, i16::MAX as f64) as i16
            })
            .collect();
        QualityVector::from_deciunits(self.base.kind(), &vals).expect("same arity as base")
    }
}

/// Runs one meter against its ground-truth trace, waking only when something
/// can happen: a quantum crossing or a due heartbeat.
#[derive(Clone, Debug)]
pub struct MeterDriver<'t> {
    cfg: MeterConfig,
    rt: MeterRuntime,
    trace: &'t ConsumptionTrace,
    quality: QualityModel,
    consumed: Amount,
}

impl<'t> MeterDriver<'t> {
    pub fn new(cfg: MeterConfig, trace: &'t ConsumptionTrace, quality: QualityModel) -> Self {
        let rt = MeterRuntime::install(&cfg, Timestamp::ZERO);
        MeterDriver {
            cfg,
            rt,
            trace,
            quality,
            consumed: Amount::ZERO,
        }
    }

    pub fn config(&self) -> &MeterConfig {
        &self.cfg
    }

    pub fn runtime(&self) -> &MeterRuntime {
        &self.rt
    }

    pub fn trace(&self) -> &'t ConsumptionTrace {
        self.trace
    }

    pub fn next_wake(&self) -> Option<Timestamp> {
        let step = self.rt.amount_to_next_quantum(&self.cfg)?;
        let quantum_at = self.trace.time_reaching(self.consumed + step);
        let heartbeat_at = self.rt.last_tx_time().plus(self.cfg.heartbeat_interval_ms);
        let t = match quantum_at {
            Some(q) => q.min(heartbeat_at),
            None => heartbeat_at,
        };
        (t <= self.trace.horizon()).then_some(t)
    }

    /// Registers consumption up to `now` and returns everything the meter sends at `now`.
    pub fn wake(&mut self, now: Timestamp) -> Vec<MeterMessage> {
        let total = self.trace.cumulative(now);
        let amount = total.saturating_sub(self.consumed);
        self.consumed = total;
        let quality = self.quality.sample(now);
        let rt = std::mem::replace(&mut self.rt, MeterRuntime::install(&self.cfg, now));
        let (rt, mut out) = rt.ingest_flow(&self.cfg, amount, now, quality);
        let (rt, hb) = rt.heartbeat_check(&self.cfg, now, quality);
        self.rt = rt;
        out.extend(hb);
        out
    }

    /// Registers the consumption left up to `end`. Call once [`next_wake`]
    /// returns `None`; nothing can cross a quantum before `end` then.
    ///
    /// [`next_wake`]: MeterDriver::next_wake
    pub fn settle(&mut self, end: Timestamp) {
        let total = self.trace.cumulative(end);
        let amount = total.saturating_sub(self.consumed);
        self.consumed = total;
        let quality = self.quality.sample(end);
        let rt = std::mem::replace(&mut self.rt, MeterRuntime::install(&self.cfg, end));
        let (rt, out) = rt.ingest_flow(&self.cfg, amount, end, quality);
        debug_assert!(out.is_empty(), "settle called with a pending wake");
        self.rt = rt;
    }
}

/// Outcome of a battery simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lifetime {
    Depleted(Timestamp),
    /// Battery still holds charge at the trace horizon.
    NeverDepletes,
}

/// Simulates the meter over `trace` and reports when the battery runs out.
pub fn battery_lifetime(cfg: &MeterConfig, trace: &ConsumptionTrace) -> Lifetime {
    let mut d = MeterDriver::new(cfg.clone(), trace, QualityModel::nominal(cfg.kind));
    while let Some(t) = d.next_wake() {
        d.wake(t);
        if d.runtime().is_dead() {
            break;
        }
    }
    if !d.runtime().is_dead() {
        d.settle(trace.horizon());
    }
    match d.runtime().depleted_at() {
        Some(t) => Lifetime::Depleted(t),
        None => Lifetime::NeverDepletes,
    }
}
