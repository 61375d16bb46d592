//! Per-meter session ledger: deduplication and gap bookkeeping.
//!
//! Sessions are tracked on an unwrapped 64-bit axis so that the 32-bit
//! counter can wrap without breaking ordering. A jump backward of more than
//! 2^31 is read as a wrap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    decode_frame, encode_frame, ConcentratorId, ConcentratorReport, MessageType, MeterId, MeterMessage, SessionNumber,
    Timestamp,
};

/// Unwrapped position of session 0 in the first epoch; a multiple of 2^32.
const ORIGIN: u64 = 1 << 40;
/// Largest forward jump accepted in one report; anything bigger is corrupt input.
pub const MAX_SESSION_JUMP: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("report for meter {got} offered to the ledger of {expected}")]
    WrongMeter { expected: MeterId, got: MeterId },
    #[error("session {0} already recorded from this concentrator at this time")]
    StaleSession(SessionNumber),
    #[error("session {0} received with a different payload; first payload kept")]
    PayloadConflict(SessionNumber),
    #[error("session {0} precedes the meter's installation")]
    BeforeInstallation(SessionNumber),
    #[error("session jump from {from} to {to} is implausible")]
    ImplausibleJump { from: SessionNumber, to: SessionNumber },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ingested {
    /// First report of this session.
    Accepted,
    /// Another concentrator's copy of an accepted session.
    Duplicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Receipt {
    pub rx_time: Timestamp,
    pub concentrator: ConcentratorId,
}

/// An accepted session and every distinct reception of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AcceptedSession {
    pub session: SessionNumber,
    pub message: MeterMessage,
    /// Sorted by (rx_time, concentrator); the first one defines the session time.
    receipts: Vec<Receipt>,
}

impl AcceptedSession {
    pub fn rx_time(&self) -> Timestamp {
        self.receipts[0].rx_time
    }

    pub fn via(&self) -> ConcentratorId {
        self.receipts[0].concentrator
    }

    pub fn report_count(&self) -> usize {
        self.receipts.len()
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn message_type(&self) -> MessageType {
        self.message.message_type
    }

    pub fn cumulative_quanta(&self) -> u32 {
        self.message.state.cumulative_quanta
    }
}

/// Installation point: the session the meter starts at and when.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Anchor {
    pub first_session: SessionNumber,
    pub installed_at: Timestamp,
}

#[derive(Clone, Debug)]
pub struct SessionLedger {
    meter_id: MeterId,
    anchor: Option<Anchor>,
    accepted: BTreeMap<u64, AcceptedSession>,
    known_gaps: BTreeSet<u64>,
    lowest: Option<u64>,
    highest: Option<u64>,
    conflicts: BTreeSet<u64>,
}

impl SessionLedger {
    /// Ledger whose tracked range starts at the first session seen.
    pub fn new(meter_id: MeterId) -> Self {
        SessionLedger {
            meter_id,
            anchor: None,
            accepted: BTreeMap::new(),
            known_gaps: BTreeSet::new(),
            lowest: None,
            highest: None,
            conflicts: BTreeSet::new(),
        }
    }

    /// Ledger for a meter whose installation session is known, so losses
    /// before the first received session are detected too.
    pub fn anchored(meter_id: MeterId, anchor: Anchor) -> Self {
        let mut l = Self::new(meter_id);
        l.anchor = Some(anchor);
        l.lowest = Some(ORIGIN + anchor.first_session.0 as u64);
        l
    }

    pub fn meter_id(&self) -> MeterId {
        self.meter_id
    }

    pub fn anchor(&self) -> Option<Anchor> {
        self.anchor
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn accepted_len(&self) -> usize {
        self.accepted.len()
    }

    pub fn gap_len(&self) -> usize {
        self.known_gaps.len()
    }

    pub fn highest_session(&self) -> Option<SessionNumber> {
        self.highest.map(session_of)
    }

    /// Length of the tracked range `[first, highest]`.
    pub fn tracked_span(&self) -> u64 {
        match (self.lowest, self.highest) {
            (Some(lo), Some(hi)) if hi >= lo => hi - lo + 1,
            _ => 0,
        }
    }

    pub fn conflicts(&self) -> impl Iterator<Item = SessionNumber> + '_ {
        self.conflicts.iter().map(|&e| session_of(e))
    }

    pub fn get(&self, session: SessionNumber) -> Option<&AcceptedSession> {
        let ext = self.locate(session)?;
        self.accepted.get(&ext)
    }

    pub fn is_gap(&self, session: SessionNumber) -> bool {
        self.locate(session).is_some_and(|e| self.known_gaps.contains(&e))
    }

    /// Accepted sessions in wrap-aware order.
    pub fn accepted(&self) -> impl Iterator<Item = &AcceptedSession> {
        self.accepted.values()
    }

    pub(crate) fn accepted_ext(&self) -> impl Iterator<Item = (u64, &AcceptedSession)> {
        self.accepted.iter().map(|(&e, a)| (e, a))
    }

    /// Unwrapped position of the virtual installation point, just before the first session.
    pub(crate) fn anchor_ext(&self) -> Option<u64> {
        self.anchor.map(|a| ORIGIN + a.first_session.0 as u64 - 1)
    }

    /// Unwrapped position of an already tracked or adjacent session.
    pub(crate) fn locate(&self, session: SessionNumber) -> Option<u64> {
        let reference = self.highest.or(self.lowest)?;
        Some(unwrap_session(reference, session.0 as u64, 32))
    }

    pub(crate) fn entry_before(&self, ext: u64) -> Option<(u64, &AcceptedSession)> {
        self.accepted.range(..ext).next_back().map(|(&e, a)| (e, a))
    }

    pub(crate) fn entry_after(&self, ext: u64) -> Option<(u64, &AcceptedSession)> {
        self.accepted.range(ext + 1..).next().map(|(&e, a)| (e, a))
    }

    pub(crate) fn gap_contains_ext(&self, ext: u64) -> bool {
        self.known_gaps.contains(&ext)
    }

    /// Records one concentrator report.
    pub fn ingest_report(&mut self, report: &ConcentratorReport) -> Result<Ingested, IngestError> {
        let msg = &report.message;
        if msg.meter_id != self.meter_id {
            return Err(IngestError::WrongMeter {
                expected: self.meter_id,
                got: msg.meter_id,
            });
        }
        let session = msg.session;
        let ext = match self.locate(session) {
            Some(e) => e,
            None => ORIGIN + session.0 as u64,
        };
        let receipt = Receipt {
            rx_time: report.rx_time,
            concentrator: report.concentrator_id,
        };

        if let Some(entry) = self.accepted.get_mut(&ext) {
            if entry.message != *msg {
                self.conflicts.insert(ext);
                return Err(IngestError::PayloadConflict(session));
            }
            return match entry.receipts.binary_search(&receipt) {
                Ok(_) => Err(IngestError::StaleSession(session)),
                Err(pos) => {
                    entry.receipts.insert(pos, receipt);
                    Ok(Ingested::Duplicate)
                }
            };
        }

        if let Some(a) = self.anchor {
            if ext < ORIGIN + a.first_session.0 as u64 {
                return Err(IngestError::BeforeInstallation(session));
            }
        }

        match (self.lowest, self.highest) {
            (None, _) => {
                self.lowest = Some(ext);
                self.highest = Some(ext);
            }
            (Some(lo), None) => {
                // anchored, first report
                self.check_jump(lo, ext)?;
                self.known_gaps.extend(lo..ext);
                self.highest = Some(ext);
            }
            (Some(lo), Some(hi)) => {
                if ext > hi {
                    self.check_jump(hi, ext)?;
                    self.known_gaps.extend(hi + 1..ext);
                    self.highest = Some(ext);
                } else if ext < lo {
                    self.check_jump(ext, lo)?;
                    self.known_gaps.extend(ext + 1..lo);
                    self.lowest = Some(ext);
                } else {
                    self.known_gaps.remove(&ext);
                }
            }
        }
        self.accepted.insert(
            ext,
            AcceptedSession {
                session,
                message: *msg,
                receipts: vec![receipt],
            },
        );
        Ok(Ingested::Accepted)
    }

    fn check_jump(&self, from: u64, to: u64) -> Result<(), IngestError> {
        if to - from > MAX_SESSION_JUMP {
            return Err(IngestError::ImplausibleJump {
                from: session_of(from),
                to: session_of(to),
            });
        }
        Ok(())
    }

    /// Known lost sessions in wrap-aware order.
    pub fn detect_gaps(&self) -> Vec<SessionNumber> {
        self.known_gaps.iter().map(|&e| session_of(e)).collect()
    }

    /// Ledger content without per-concentrator reception details: what a
    /// single perfect receiver would have recorded.
    pub fn dedup_view(&self) -> DedupView {
        let base = self.lowest.unwrap_or(ORIGIN);
        DedupView {
            sessions: self
                .accepted
                .iter()
                .map(|(&e, a)| (e - base, a.session, a.rx_time(), a.message))
                .collect(),
            gaps: self.known_gaps.iter().map(|&e| (e - base, session_of(e))).collect(),
        }
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            accepted: self
                .accepted
                .values()
                .map(|a| AcceptedSnapshot {
                    frame: hex::encode(encode_frame(&a.message)),
                    receipts: a
                        .receipts
                        .iter()
                        .map(|r| ReceiptSnapshot {
                            concentrator_id: r.concentrator.0,
                            rx_time_ms: r.rx_time.0,
                        })
                        .collect(),
                    session: a.session.0,
                })
                .collect(),
            anchor: self.anchor.map(|a| AnchorSnapshot {
                first_session: a.first_session.0,
                installed_at_ms: a.installed_at.0,
            }),
            conflicts: self.conflicts().map(|s| s.0).collect(),
            gaps: self.detect_gaps().into_iter().map(|s| s.0).collect(),
            highest_session: self.highest_session().map(|s| s.0),
            meter_id: self.meter_id.0,
        }
    }

    /// Empty ledger with the same identity and anchor as `snap`.
    pub fn blank_from(snap: &LedgerSnapshot) -> Self {
        let id = MeterId(snap.meter_id);
        match snap.anchor {
            Some(a) => Self::anchored(
                id,
                Anchor {
                    first_session: SessionNumber(a.first_session),
                    installed_at: Timestamp(a.installed_at_ms),
                },
            ),
            None => Self::new(id),
        }
    }

    /// Rebuilds a ledger by re-ingesting every receipt recorded in `snap`.
    pub fn restore(snap: &LedgerSnapshot) -> Result<Self, RestoreError> {
        let mut l = Self::blank_from(snap);
        for a in &snap.accepted {
            let bytes = hex::decode(&a.frame).map_err(|e| RestoreError(e.to_string()))?;
            let message = decode_frame(&bytes).map_err(|e| RestoreError(e.to_string()))?;
            for r in &a.receipts {
                let report = ConcentratorReport {
                    message,
                    concentrator_id: ConcentratorId(r.concentrator_id),
                    rx_time: Timestamp(r.rx_time_ms),
                    concentrator_state: Default::default(),
                };
                l.ingest_report(&report).map_err(|e| RestoreError(e.to_string()))?;
            }
        }
        Ok(l)
    }
}

impl PartialEq for SessionLedger {
    fn eq(&self, other: &Self) -> bool {
        self.snapshot() == other.snapshot()
    }
}

#[derive(Debug, Error)]
#[error("cannot restore ledger: {0}")]
pub struct RestoreError(String);

/// Deduplicated content of a ledger, positions relative to the tracked start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DedupView {
    pub sessions: Vec<(u64, SessionNumber, Timestamp, MeterMessage)>,
    pub gaps: Vec<(u64, SessionNumber)>,
}

fn session_of(ext: u64) -> SessionNumber {
    SessionNumber(ext as u32)
}

/// Maps a `bits`-wide counter value onto the unwrapped axis, choosing the
/// representative closest to `reference` (ties resolve forward).
pub fn unwrap_session(reference: u64, value: u64, bits: u32) -> u64 {
    let modulus = 1u64 << bits;
    let mask = modulus - 1;
    let diff = value.wrapping_sub(reference) & mask;
    if diff <= modulus / 2 {
        // forward distances up to and including half the range
        reference + diff
    } else {
        reference - (modulus - diff)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptSnapshot {
    pub concentrator_id: u64,
    pub rx_time_ms: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedSnapshot {
    pub frame: String,
    pub receipts: Vec<ReceiptSnapshot>,
    pub session: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSnapshot {
    pub first_session: u32,
    pub installed_at_ms: i64,
}

/// One NDJSON line of `ledgers.ndjson`. Fields are declared alphabetically so
/// the serialized key order is canonical.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub accepted: Vec<AcceptedSnapshot>,
    pub anchor: Option<AnchorSnapshot>,
    pub conflicts: Vec<u32>,
    pub gaps: Vec<u32>,
    pub highest_session: Option<u32>,
    pub meter_id: u64,
}
