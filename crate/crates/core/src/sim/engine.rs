//! Discrete-event engine: one ordered queue drives every meter, the channel,
//! the concentrators and the center.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::center::{quantum_times, CenterError, IngestError, Ingested, Interpolation, MonitoringCenter};
use crate::concentrator::{broadcast, Concentrator};
use crate::domain::units::{MS_PER_HOUR, MS_PER_MINUTE};
use crate::domain::{
    frame_len, ConcentratorId, ConcentratorReport, MessageType, MeterId, MeterMessage, Quantity, Quantum,
    SessionNumber, Timestamp,
};
use crate::meter::{MeterDriver, MeterRuntime};

use super::events::{DropReason, EventSink, IngestOutcome, SimEvent};
use super::metric::{quantum_steps, step_rmse, DetailMetric, MeterMetric};
use super::scenario::{Mode, Scenario, ScenarioError};
use super::trace::ConsumptionTrace;

/// A polled reading carries the frame plus a 64-bit register value.
pub const TI_REGISTER_BYTES: usize = 8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("writing event log: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Keep a monitoring center (needed for ledgers and Ri metrics).
    pub retain_center: bool,
    /// Keep a per-emission ground-truth record for every meter.
    pub record_truth: bool,
    /// Width of the buckets emissions are counted in.
    pub bucket_ms: i64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            retain_center: true,
            record_truth: true,
            bucket_ms: MS_PER_MINUTE,
        }
    }
}

/// One transmission as it really happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Emission {
    pub session: SessionNumber,
    pub time: Timestamp,
    pub message_type: MessageType,
    /// At least one copy made it to the center.
    pub reached_center: bool,
}

#[derive(Clone, Debug)]
pub struct MeterTruth {
    pub meter_id: MeterId,
    pub quantum: Quantum,
    pub trace: ConsumptionTrace,
    pub emissions: Vec<Emission>,
    pub final_state: MeterRuntime,
}

impl MeterTruth {
    pub fn lost_sessions(&self) -> Vec<SessionNumber> {
        self.emissions
            .iter()
            .filter(|e| !e.reached_center)
            .map(|e| e.session)
            .collect()
    }

    pub fn quantum_events(&self) -> u64 {
        self.emissions
            .iter()
            .filter(|e| e.message_type == MessageType::QuantumEvent)
            .count() as u64
    }

    pub fn last_session_reached_center(&self) -> bool {
        self.emissions.last().is_none_or(|e| e.reached_center)
    }
}

#[derive(Clone, Debug)]
pub struct RiOutcome {
    pub center: Option<MonitoringCenter>,
    pub truth: Vec<MeterTruth>,
    pub metrics: Vec<MeterMetric>,
    /// Emissions of all meters per `bucket_ms` bucket.
    pub emission_buckets: Vec<u64>,
    pub bucket_ms: i64,
}

impl RiOutcome {
    pub fn detail(&self) -> DetailMetric {
        DetailMetric::aggregate(self.metrics.iter().map(|m| &m.detail))
    }
}

#[derive(Clone, Debug)]
pub struct TiOutcome {
    pub dt_ms: i64,
    /// Readings that reached the center, per meter in scenario order.
    pub readings: Vec<Vec<(Timestamp, Quantity)>>,
    pub metrics: Vec<MeterMetric>,
}

impl TiOutcome {
    pub fn detail(&self) -> DetailMetric {
        DetailMetric::aggregate(self.metrics.iter().map(|m| &m.detail))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub horizon_ms: i64,
    pub ri: Option<RiOutcome>,
    pub ti: Option<TiOutcome>,
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Wake(usize),
    Ingest(ConcentratorReport, usize),
    Poll(usize, i64),
}

#[derive(Debug)]
struct Queued {
    time: i64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // reversed: BinaryHeap pops the earliest (time, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Queued>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: Timestamp, ev: Ev) {
        self.heap.push(Queued {
            time: time.0,
            seq: self.seq,
            ev,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(Timestamp, Ev)> {
        self.heap.pop().map(|q| (Timestamp(q.time), q.ev))
    }
}

/// Runs Ri only, whatever the scenario's mode.
pub fn run_ri(scenario: &Scenario, sink: &mut dyn EventSink) -> Result<RiOutcome, SimError> {
    let sc = Scenario {
        mode: Mode::Ri,
        ..scenario.clone()
    };
    Ok(run(&sc, sink, RunOptions::default())?.ri.expect("Ri mode"))
}

/// Runs the polling baseline only, at interval `dt_ms`.
pub fn run_ti(scenario: &Scenario, dt_ms: i64, sink: &mut dyn EventSink) -> Result<TiOutcome, SimError> {
    let sc = Scenario {
        mode: Mode::Ti { dt_ms },
        ..scenario.clone()
    };
    Ok(run(&sc, sink, RunOptions::default())?.ti.expect("Ti mode"))
}

/// Simulates `scenario` over its horizon, reporting every event to `sink`.
pub fn run(scenario: &Scenario, sink: &mut dyn EventSink, opts: RunOptions) -> Result<RunOutcome, SimError> {
    scenario.validate()?;
    let horizon = Timestamp(scenario.horizon_ms);
    let traces = scenario.traces()?;
    let ri_on = scenario.mode.includes_ri();
    let dt = scenario.mode.poll_interval();

    let mut ri_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut ti_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    ti_rng.set_stream(1);

    let mut concs: Vec<Concentrator> = scenario.concentrators.iter().cloned().map(Concentrator::new).collect();
    let conc_index: BTreeMap<ConcentratorId, usize> = concs.iter().enumerate().map(|(i, c)| (c.id(), i)).collect();
    let mut center =
        (ri_on && opts.retain_center).then(|| MonitoringCenter::new(scenario.registry().expect("validated")));

    let mut drivers: Vec<MeterDriver<'_>> = scenario
        .meters
        .iter()
        .zip(&traces)
        .map(|(m, t)| MeterDriver::new(m.config.clone(), t, m.quality))
        .collect();
    let n = drivers.len();
    let mut emissions: Vec<Vec<Emission>> = vec![Vec::new(); n];
    let mut ri_counts = vec![0u64; n];
    let mut buckets: Vec<u64> = Vec::new();
    let mut ti_counts = vec![0u64; n];
    let mut readings: Vec<Vec<(Timestamp, Quantity)>> = vec![Vec::new(); n];

    let mut q = Queue::default();
    if ri_on {
        for (i, d) in drivers.iter().enumerate() {
            if let Some(t) = d.next_wake() {
                q.push(t, Ev::Wake(i));
            }
        }
    }
    if let Some(dt) = dt {
        if dt <= scenario.horizon_ms {
            for i in 0..n {
                q.push(Timestamp(dt), Ev::Poll(i, 1));
            }
        }
    }

    while let Some((t, ev)) = q.pop() {
        match ev {
            Ev::Wake(i) => {
                let msgs = drivers[i].wake(t);
                for msg in msgs {
                    ri_counts[i] += 1;
                    let b = (t.0 / opts.bucket_ms) as usize;
                    if buckets.len() <= b {
                        buckets.resize(b + 1, 0);
                    }
                    buckets[b] += 1;
                    sink.record(&SimEvent::Emitted { time: t, message: msg })?;
                    let reached = transmit(
                        &msg,
                        t,
                        scenario,
                        &mut concs,
                        &conc_index,
                        &mut ri_rng,
                        sink,
                        |report, ci| {
                            if center.is_some() {
                                q.push(t.plus(scenario.uplink_delay_ms), Ev::Ingest(report, ci));
                            }
                        },
                    )?;
                    if center.is_none() {
                        for c in concs.iter_mut() {
                            c.delivered();
                        }
                    }
                    if opts.record_truth {
                        emissions[i].push(Emission {
                            session: msg.session,
                            time: t,
                            message_type: msg.message_type,
                            reached_center: reached,
                        });
                    }
                }
                if let Some(next) = drivers[i].next_wake() {
                    q.push(next, Ev::Wake(i));
                }
            }
            Ev::Ingest(report, ci) => {
                concs[ci].delivered();
                let Some(center) = center.as_mut() else { continue };
                let outcome = match center.ingest(&report) {
                    Ok(Ingested::Accepted) => IngestOutcome::Accepted,
                    Ok(Ingested::Duplicate) => IngestOutcome::Duplicate,
                    Err(CenterError::UnknownMeter(_)) => IngestOutcome::UnknownMeter,
                    Err(CenterError::Ingest(IngestError::StaleSession(_))) => IngestOutcome::Stale,
                    Err(CenterError::Ingest(IngestError::PayloadConflict(_))) => IngestOutcome::Conflict,
                    Err(CenterError::Ingest(_)) => IngestOutcome::Rejected,
                };
                sink.record(&SimEvent::CenterIngest {
                    time: t,
                    report,
                    outcome,
                })?;
            }
            Ev::Poll(i, k) => {
                let m = &scenario.meters[i].config;
                let register = traces[i].cumulative(t).floor_quantity();
                // the baseline shares the radio channel but not the uplink
                let probe = MeterMessage {
                    meter_id: m.id,
                    session: SessionNumber(k as u32),
                    message_type: MessageType::Heartbeat,
                    quality: scenario.meters[i].quality.sample(t),
                    state: crate::domain::MeterState::nominal(),
                };
                let delivered = broadcast(&scenario.visibility, &probe, &mut ti_rng)
                    .iter()
                    .fold(false, |acc, (_, ok)| acc | ok);
                ti_counts[i] += 1;
                if delivered {
                    readings[i].push((t, register));
                }
                sink.record(&SimEvent::TiReading {
                    time: t,
                    meter: m.id,
                    kind: m.kind,
                    register,
                    delivered,
                })?;
                let dt = dt.expect("poll scheduled");
                let next = (k + 1) * dt;
                if next <= scenario.horizon_ms {
                    q.push(Timestamp(next), Ev::Poll(i, k + 1));
                }
            }
        }
    }

    if ri_on {
        for d in drivers.iter_mut() {
            d.settle(horizon);
        }
    }
    let finals: Vec<MeterRuntime> = drivers.iter().map(|d| d.runtime().clone()).collect();
    drop(drivers);

    let ri = ri_on.then(|| {
        let metrics = scenario
            .meters
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let cfg = &m.config;
                let rmse = match &center {
                    Some(c) => {
                        let ledger = c.ledger(cfg.id).expect("registered");
                        let times = quantum_times(ledger, Interpolation::Uniform);
                        step_rmse(
                            &traces[i],
                            scenario.grid_ms,
                            &quantum_steps(&times, cfg.quantum.delta_r()),
                        )
                    }
                    None => f64::NAN,
                };
                MeterMetric {
                    meter_id: cfg.id,
                    kind: cfg.kind,
                    detail: DetailMetric {
                        rmse,
                        message_count: ri_counts[i],
                        bytes_sent: ri_counts[i] * cfg.frame_len() as u64,
                    },
                    battery_used: (cfg.battery_capacity - finals[i].battery_remaining()).max(0.0),
                    battery_capacity: cfg.battery_capacity,
                }
            })
            .collect();
        let truth = if opts.record_truth {
            scenario
                .meters
                .iter()
                .zip(traces.iter())
                .zip(emissions)
                .zip(finals.iter())
                .map(|(((m, t), e), f)| MeterTruth {
                    meter_id: m.config.id,
                    quantum: m.config.quantum,
                    trace: t.clone(),
                    emissions: e,
                    final_state: f.clone(),
                })
                .collect()
        } else {
            Vec::new()
        };
        RiOutcome {
            center,
            truth,
            metrics,
            emission_buckets: buckets,
            bucket_ms: opts.bucket_ms,
        }
    });

    let ti = dt.map(|dt_ms| {
        let metrics = scenario
            .meters
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let cfg = &m.config;
                let steps: Vec<(f64, u64)> = readings[i].iter().map(|(t, r)| (t.0 as f64, r.deciunits())).collect();
                let idle = cfg.idle_drain_per_hour * scenario.horizon_ms as f64 / MS_PER_HOUR as f64;
                MeterMetric {
                    meter_id: cfg.id,
                    kind: cfg.kind,
                    detail: DetailMetric {
                        rmse: step_rmse(&traces[i], scenario.grid_ms, &steps),
                        message_count: ti_counts[i],
                        bytes_sent: ti_counts[i] * (frame_len(cfg.kind) + TI_REGISTER_BYTES) as u64,
                    },
                    battery_used: ti_counts[i] as f64 * cfg.tx_cost + idle,
                    battery_capacity: cfg.battery_capacity,
                }
            })
            .collect();
        TiOutcome {
            dt_ms,
            readings,
            metrics,
        }
    });

    Ok(RunOutcome {
        horizon_ms: scenario.horizon_ms,
        ri,
        ti,
    })
}

/// Sends one frame over the radio hop and through each receiving
/// concentrator's uplink. Returns whether any copy will reach the center.
#[allow(clippy::too_many_arguments)]
fn transmit(
    msg: &MeterMessage,
    t: Timestamp,
    scenario: &Scenario,
    concs: &mut [Concentrator],
    conc_index: &BTreeMap<ConcentratorId, usize>,
    rng: &mut ChaCha8Rng,
    sink: &mut dyn EventSink,
    mut forward: impl FnMut(ConcentratorReport, usize),
) -> io::Result<bool> {
    let mut reached = false;
    for (cid, ok) in broadcast(&scenario.visibility, msg, rng) {
        let drop = |reason| SimEvent::Drop {
            time: t,
            meter: msg.meter_id,
            session: msg.session,
            concentrator: cid,
            reason,
        };
        if !ok {
            sink.record(&drop(DropReason::Radio))?;
            continue;
        }
        let ci = conc_index[&cid];
        let report = concs[ci].receive(*msg, t);
        sink.record(&SimEvent::Delivery { time: t, report })?;
        if concs[ci].forward(rng) {
            reached = true;
            forward(report, ci);
        } else {
            sink.record(&drop(DropReason::Uplink))?;
        }
    }
    Ok(reached)
}
