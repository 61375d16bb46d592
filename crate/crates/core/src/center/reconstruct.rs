//! Consumption reconstruction from a session ledger.

use thiserror::Error;

use crate::domain::{MessageType, MeterId, Quantity, Quantum, SessionNumber, Timestamp};

use super::ledger::SessionLedger;
use super::profile::{uniform_points, ConsumerProfile};

/// One end of a gap: the last known session before it or the first after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GapBound {
    /// `None` for the installation point of an anchored ledger.
    pub session: Option<SessionNumber>,
    pub time: Timestamp,
    pub cumulative_quanta: u32,
}

/// A maximal run of consecutive lost sessions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapRun {
    pub first: SessionNumber,
    pub len: u64,
    pub lower: GapBound,
    pub upper: GapBound,
    /// Quantum events among the lost sessions, from the cumulative counters
    /// of the two bounds.
    pub lost_quanta: u64,
}

impl GapRun {
    pub fn sessions(&self) -> Vec<SessionNumber> {
        (0..self.len)
            .map(|i| SessionNumber(self.first.0.wrapping_add(i as u32)))
            .collect()
    }
}

/// Every gap of the ledger together with its bounding sessions.
pub fn gap_runs(ledger: &SessionLedger) -> Vec<GapRun> {
    let mut runs = Vec::new();
    let mut prev: Option<(u64, GapBound)> = ledger.anchor().zip(ledger.anchor_ext()).map(|(a, ext)| {
        (
            ext,
            GapBound {
                session: None,
                time: a.installed_at,
                cumulative_quanta: 0,
            },
        )
    });
    for (ext, acc) in ledger.accepted_ext() {
        let bound = GapBound {
            session: Some(acc.session),
            time: acc.rx_time(),
            cumulative_quanta: acc.cumulative_quanta(),
        };
        if let Some((pext, lower)) = prev {
            let len = ext - pext - 1;
            if len > 0 {
                let is_q = u32::from(acc.message_type() == MessageType::QuantumEvent);
                let counted = acc.cumulative_quanta().wrapping_sub(lower.cumulative_quanta);
                let lost = counted.saturating_sub(is_q) as u64;
                runs.push(GapRun {
                    first: SessionNumber((pext + 1) as u32),
                    len,
                    lower,
                    upper: bound,
                    lost_quanta: lost.min(len),
                });
            }
        }
        prev = Some((ext, bound));
    }
    runs
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterpolationError {
    #[error("gap is empty")]
    EmptyGap,
    #[error("session {0} is not a known gap")]
    NotAGap(SessionNumber),
    #[error("sessions do not form one contiguous run")]
    NotContiguous,
    #[error("no accepted session after the gap yet; retry later")]
    UnboundedGap,
    #[error("{needed} sessions do not fit strictly between {lower} and {upper}")]
    GapTooNarrow {
        needed: usize,
        lower: Timestamp,
        upper: Timestamp,
    },
}

#[derive(Clone, Copy, Debug)]
pub enum Interpolation<'p> {
    Uniform,
    Profile(&'p ConsumerProfile),
}

impl Interpolation<'_> {
    fn points(&self, a: f64, b: f64, n: usize) -> Vec<f64> {
        match self {
            Interpolation::Uniform => uniform_points(a, b, n),
            Interpolation::Profile(p) => p.quantile_points(a, b, n),
        }
    }
}

/// Estimated emission times for a contiguous run of lost sessions, strictly
/// increasing and strictly inside the bounding sessions' times.
pub fn interpolate_lost_times(
    ledger: &SessionLedger,
    method: Interpolation<'_>,
    gap: &[SessionNumber],
) -> Result<Vec<(SessionNumber, Timestamp)>, InterpolationError> {
    let first = *gap.first().ok_or(InterpolationError::EmptyGap)?;
    for w in gap.windows(2) {
        if w[1] != w[0].next() {
            return Err(InterpolationError::NotContiguous);
        }
    }
    let start = ledger.locate(first).ok_or(InterpolationError::UnboundedGap)?;
    for (i, s) in gap.iter().enumerate() {
        let ext = start + i as u64;
        if !ledger.gap_contains_ext(ext) {
            if ledger
                .highest_session()
                .is_none_or(|h| ext > ledger.locate(h).unwrap_or(0))
            {
                return Err(InterpolationError::UnboundedGap);
            }
            return Err(InterpolationError::NotAGap(*s));
        }
    }
    let end = start + gap.len() as u64 - 1;
    let lower = match ledger.entry_before(start) {
        Some((_, a)) => a.rx_time(),
        None => match ledger.anchor() {
            Some(a) => a.installed_at,
            None => return Err(InterpolationError::UnboundedGap),
        },
    };
    let upper = ledger
        .entry_after(end)
        .map(|(_, a)| a.rx_time())
        .ok_or(InterpolationError::UnboundedGap)?;
    let times = place_strictly(lower, upper, gap.len(), method)?;
    Ok(gap.iter().copied().zip(times).collect())
}

/// Rounds interpolated points to whole milliseconds inside `(lower, upper)`
/// while keeping them strictly increasing.
fn place_strictly(
    lower: Timestamp,
    upper: Timestamp,
    n: usize,
    method: Interpolation<'_>,
) -> Result<Vec<Timestamp>, InterpolationError> {
    let room = upper.since(lower) - 1;
    if room < n as i64 {
        return Err(InterpolationError::GapTooNarrow {
            needed: n,
            lower,
            upper,
        });
    }
    let pts = method.points(lower.0 as f64, upper.0 as f64, n);
    let mut out: Vec<i64> = pts
        .iter()
        .map(|p| (p.round() as i64).clamp(lower.0 + 1, upper.0 - 1))
        .collect();
    for i in 1..n {
        out[i] = out[i].max(out[i - 1] + 1);
    }
    let mut cap = upper.0 - 1;
    for t in out.iter_mut().rev() {
        *t = (*t).min(cap);
        cap = *t - 1;
    }
    Ok(out.into_iter().map(Timestamp).collect())
}

/// Times of every known quantum: received events at their reception time and
/// lost events placed inside their gap.
pub fn quantum_times(ledger: &SessionLedger, method: Interpolation<'_>) -> Vec<f64> {
    let mut out: Vec<f64> = ledger
        .accepted()
        .filter(|a| a.message_type() == MessageType::QuantumEvent)
        .map(|a| a.rx_time().0 as f64)
        .collect();
    for run in gap_runs(ledger) {
        out.extend(method.points(
            run.lower.time.0 as f64,
            run.upper.time.0 as f64,
            run.lost_quanta as usize,
        ));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Inclusive time window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Window {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        Window { start, end }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("window end {end} precedes start {start}")]
    InvalidWindow { start: Timestamp, end: Timestamp },
    #[error("no data for meter {0} in the window")]
    NoData(MeterId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub meter_id: MeterId,
    pub window: Window,
    pub quanta_received: u64,
    pub quanta_recovered: u64,
    /// (received + recovered)·ΔR.
    pub amount: Quantity,
    /// Lost quanta that may fall in the window but whose gap closes after it.
    pub trailing_uncertainty: Quantity,
}

impl ReconstructionResult {
    pub fn quanta(&self) -> u64 {
        self.quanta_received + self.quanta_recovered
    }

    /// Amount in base units after applying a drift scale factor.
    pub fn corrected_amount(&self, scale: f64) -> f64 {
        self.amount.as_base_units() * scale
    }
}

/// Consumption in `window`: received quantum events plus lost ones recovered
/// from fully bounded gaps. Lost quanta are attributed to the window by
/// uniform interpolation within their gap.
pub fn reconstruct(
    ledger: &SessionLedger,
    quantum: Quantum,
    window: Window,
) -> Result<ReconstructionResult, ReconstructError> {
    if window.end < window.start {
        return Err(ReconstructError::InvalidWindow {
            start: window.start,
            end: window.end,
        });
    }
    let mut any = false;
    let mut received = 0u64;
    for a in ledger.accepted() {
        if window.contains(a.rx_time()) {
            any = true;
            if a.message_type() == MessageType::QuantumEvent {
                received += 1;
            }
        }
    }
    let (t0, t1) = (window.start.0 as f64, window.end.0 as f64);
    let mut recovered = 0u64;
    let mut trailing = 0u64;
    for run in gap_runs(ledger) {
        let (ta, tb) = (run.lower.time, run.upper.time);
        if ta > window.end || tb < window.start || run.lost_quanta == 0 {
            continue;
        }
        let pts = uniform_points(ta.0 as f64, tb.0 as f64, run.lost_quanta as usize);
        if tb <= window.end {
            recovered += pts.iter().filter(|&&t| t0 <= t && t <= t1).count() as u64;
        } else {
            trailing += pts.iter().filter(|&&t| t >= t0).count() as u64;
        }
    }
    if !any && recovered == 0 && trailing == 0 {
        return Err(ReconstructError::NoData(ledger.meter_id()));
    }
    let dr = quantum.delta_r();
    Ok(ReconstructionResult {
        meter_id: ledger.meter_id(),
        window,
        quanta_received: received,
        quanta_recovered: recovered,
        amount: dr.times(received + recovered),
        trailing_uncertainty: dr.times(trailing),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::center::ledger::Anchor;
    use crate::domain::{
        ConcentratorId, ConcentratorReport, ConcentratorState, MeterMessage, MeterState, QualityVector, ResourceKind,
    };

    const H: i64 = 3_600_000;

    fn qe(session: u32, cq: u32, rx: i64) -> ConcentratorReport {
        msg(session, cq, rx, MessageType::QuantumEvent)
    }

    fn msg(session: u32, cq: u32, rx: i64, t: MessageType) -> ConcentratorReport {
        ConcentratorReport {
            message: MeterMessage {
                meter_id: MeterId(4),
                session: SessionNumber(session),
                message_type: t,
                quality: QualityVector::nominal(ResourceKind::Electricity),
                state: MeterState {
                    cumulative_quanta: cq,
                    ..MeterState::nominal()
                },
            },
            concentrator_id: ConcentratorId(1),
            rx_time: Timestamp(rx),
            concentrator_state: ConcentratorState::default(),
        }
    }

    fn elec() -> Quantum {
        Quantum::default_for(ResourceKind::Electricity)
    }

    fn whole(l: &SessionLedger) -> Window {
        let _ = l;
        Window::new(Timestamp(0), Timestamp(1000 * H))
    }

    #[test]
    fn ten_events_make_100_wh() {
        let mut l = SessionLedger::new(MeterId(4));
        for s in 1..=10 {
            l.ingest_report(&qe(s, s, s as i64 * H)).unwrap();
        }
        let r = reconstruct(&l, elec(), whole(&l)).unwrap();
        assert_eq!(r.amount, Quantity::from_base_units(100));
        assert_eq!(r.quanta_recovered, 0);
    }

    #[test]
    fn bounded_gap_recovered() {
        let mut l = SessionLedger::new(MeterId(4));
        for s in (1..=10).filter(|s| *s != 5 && *s != 6) {
            l.ingest_report(&qe(s, s, s as i64 * H)).unwrap();
        }
        let r = reconstruct(&l, elec(), Window::new(Timestamp(0), Timestamp(11 * H))).unwrap();
        assert_eq!(r.quanta_received, 8);
        assert_eq!(r.quanta_recovered, 2);
        assert_eq!(r.amount, Quantity::from_base_units(100));
        assert_eq!(r.trailing_uncertainty, Quantity::ZERO);
    }

    #[test]
    fn gap_closing_after_window_is_uncertain() {
        let mut l = SessionLedger::new(MeterId(4));
        for s in [1, 2, 3, 8] {
            l.ingest_report(&qe(s, s, s as i64 * H)).unwrap();
        }
        let r = reconstruct(&l, elec(), Window::new(Timestamp(0), Timestamp(5 * H))).unwrap();
        assert_eq!(r.quanta_received, 3);
        assert_eq!(r.quanta_recovered, 0);
        assert_eq!(r.trailing_uncertainty, Quantity::from_base_units(40));
    }

    #[test]
    fn heartbeat_in_gap_is_not_counted() {
        let mut l = SessionLedger::new(MeterId(4));
        // session 2 was a lost heartbeat: counters 1 -> 2 across sessions 1..3
        l.ingest_report(&qe(1, 1, H)).unwrap();
        l.ingest_report(&qe(3, 2, 30 * H)).unwrap();
        let runs = gap_runs(&l);
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].lost_quanta, 0);
        let r = reconstruct(&l, elec(), whole(&l)).unwrap();
        assert_eq!(r.amount, Quantity::from_base_units(20));
    }

    #[test]
    fn anchored_leading_gap_recovered() {
        let mut l = SessionLedger::anchored(
            MeterId(4),
            Anchor {
                first_session: SessionNumber(0),
                installed_at: Timestamp(0),
            },
        );
        l.ingest_report(&qe(3, 4, 4 * H)).unwrap();
        let r = reconstruct(&l, elec(), whole(&l)).unwrap();
        assert_eq!(r.quanta(), 4);
    }

    #[test]
    fn no_data_and_invalid_window() {
        let l = SessionLedger::new(MeterId(4));
        assert_eq!(
            reconstruct(&l, elec(), whole(&l)),
            Err(ReconstructError::NoData(MeterId(4)))
        );
        assert!(matches!(
            reconstruct(&l, elec(), Window::new(Timestamp(5), Timestamp(4))),
            Err(ReconstructError::InvalidWindow { .. })
        ));
    }

    #[test]
    fn heartbeats_only_give_zero() {
        let mut l = SessionLedger::new(MeterId(4));
        l.ingest_report(&msg(0, 0, 24 * H, MessageType::Heartbeat)).unwrap();
        let r = reconstruct(&l, elec(), whole(&l)).unwrap();
        assert_eq!(r.amount, Quantity::ZERO);
    }

    #[test]
    fn interpolation_strict_and_ordered() {
        let mut l = SessionLedger::new(MeterId(4));
        l.ingest_report(&qe(1, 1, 1000)).unwrap();
        l.ingest_report(&qe(5, 5, 1004)).unwrap();
        let gap = l.detect_gaps();
        let t = interpolate_lost_times(&l, Interpolation::Uniform, &gap).unwrap();
        assert_eq!(t.iter().map(|x| x.1 .0).collect::<Vec<_>>(), vec![1001, 1002, 1003]);

        let mut l = SessionLedger::new(MeterId(4));
        l.ingest_report(&qe(1, 1, 1000)).unwrap();
        l.ingest_report(&qe(5, 5, 1003)).unwrap();
        let gap = l.detect_gaps();
        assert!(matches!(
            interpolate_lost_times(&l, Interpolation::Uniform, &gap),
            Err(InterpolationError::GapTooNarrow { .. })
        ));
    }

    #[test]
    fn interpolation_rejects_bad_runs() {
        let mut l = SessionLedger::new(MeterId(4));
        l.ingest_report(&qe(1, 1, 0)).unwrap();
        l.ingest_report(&qe(4, 4, H)).unwrap();
        assert_eq!(
            interpolate_lost_times(&l, Interpolation::Uniform, &[SessionNumber(2), SessionNumber(4)]),
            Err(InterpolationError::NotContiguous)
        );
        assert_eq!(
            interpolate_lost_times(&l, Interpolation::Uniform, &[SessionNumber(3), SessionNumber(4)]),
            Err(InterpolationError::NotAGap(SessionNumber(4)))
        );
        assert_eq!(
            interpolate_lost_times(&l, Interpolation::Uniform, &[SessionNumber(5)]),
            Err(InterpolationError::UnboundedGap)
        );
        assert_eq!(
            interpolate_lost_times(&l, Interpolation::Uniform, &[]),
            Err(InterpolationError::EmptyGap)
        );
    }
}
