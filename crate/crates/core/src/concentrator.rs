//! Concentrators: receive meter frames over the radio hop, stamp them with the
//! reception time and their own state, and forward them to the center.
//!
//! Radio propagation is a static visibility graph with an independent
//! Bernoulli loss on every meter→concentrator link.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::domain::{ConcentratorId, ConcentratorReport, ConcentratorState, MeterId, MeterMessage, Timestamp};

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("meter {0} has no visibility link to any concentrator")]
    NoLink(MeterId),
    #[error("meter {meter} links to unknown concentrator {concentrator}")]
    UnknownConcentrator {
        meter: MeterId,
        concentrator: ConcentratorId,
    },
    #[error("link {meter}->{concentrator} declared twice")]
    DuplicateLink {
        meter: MeterId,
        concentrator: ConcentratorId,
    },
    #[error("loss probability {0} outside [0, 1]")]
    LossProbability(f64),
    #[error("concentrator {id} clock skew {skew_ms} ms exceeds the {max_ms} ms bound")]
    Skew {
        id: ConcentratorId,
        skew_ms: i64,
        max_ms: i64,
    },
}

fn check_probability(p: f64) -> Result<f64, TopologyError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(TopologyError::LossProbability(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Uplink {
    Reliable,
    /// Each forwarded report is lost with this probability.
    Lossy(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentratorConfig {
    pub id: ConcentratorId,
    /// Abstract (building, floor) grid coordinate.
    pub position: (i32, i32),
    /// Residual offset of the concentrator clock after synchronization.
    pub clock_skew_ms: i64,
    pub uplink: Uplink,
}

impl ConcentratorConfig {
    pub fn new(id: ConcentratorId) -> Self {
        ConcentratorConfig {
            id,
            position: (0, 0),
            clock_skew_ms: 0,
            uplink: Uplink::Reliable,
        }
    }

    pub fn validate(&self, max_skew_ms: i64) -> Result<(), TopologyError> {
        if self.clock_skew_ms.abs() > max_skew_ms {
            return Err(TopologyError::Skew {
                id: self.id,
                skew_ms: self.clock_skew_ms,
                max_ms: max_skew_ms,
            });
        }
        if let Uplink::Lossy(p) = self.uplink {
            check_probability(p)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Link {
    pub concentrator: ConcentratorId,
    pub loss: f64,
}

/// Which concentrators hear which meters, and how reliably.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VisibilityMap {
    links: BTreeMap<MeterId, Vec<Link>>,
}

impl VisibilityMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_link(&mut self, meter: MeterId, concentrator: ConcentratorId, loss: f64) -> Result<(), TopologyError> {
        check_probability(loss)?;
        let links = self.links.entry(meter).or_default();
        match links.binary_search_by_key(&concentrator, |l| l.concentrator) {
            Ok(_) => Err(TopologyError::DuplicateLink { meter, concentrator }),
            Err(pos) => {
                links.insert(pos, Link { concentrator, loss });
                Ok(())
            }
        }
    }

    /// Links of `meter`, ordered by concentrator id.
    pub fn links(&self, meter: MeterId) -> &[Link] {
        self.links.get(&meter).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn set_loss_all(&mut self, loss: f64) -> Result<(), TopologyError> {
        check_probability(loss)?;
        for l in self.links.values_mut().flatten() {
            l.loss = loss;
        }
        Ok(())
    }

    pub fn link_count(&self) -> usize {
        self.links.values().map(Vec::len).sum()
    }

    /// Every meter must reach at least one known concentrator.
    pub fn validate(
        &self,
        meters: impl IntoIterator<Item = MeterId>,
        concentrators: &BTreeSet<ConcentratorId>,
    ) -> Result<(), TopologyError> {
        for m in meters {
            let links = self.links(m);
            if links.is_empty() {
                return Err(TopologyError::NoLink(m));
            }
            for l in links {
                if !concentrators.contains(&l.concentrator) {
                    return Err(TopologyError::UnknownConcentrator {
                        meter: m,
                        concentrator: l.concentrator,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One delivery draw per link, in concentrator-id order.
pub fn broadcast<R: Rng + ?Sized>(vis: &VisibilityMap, msg: &MeterMessage, rng: &mut R) -> Vec<(ConcentratorId, bool)> {
    vis.links(msg.meter_id)
        .iter()
        .map(|l| {
            let u: f64 = rng.gen();
            (l.concentrator, u >= l.loss)
        })
        .collect()
}

/// A concentrator and its running state.
#[derive(Clone, Debug)]
pub struct Concentrator {
    cfg: ConcentratorConfig,
    uplink_ok: bool,
    in_flight: u32,
    pub forwarded: u64,
    pub uplink_drops: u64,
}

impl Concentrator {
    pub fn new(cfg: ConcentratorConfig) -> Self {
        Concentrator {
            cfg,
            uplink_ok: true,
            in_flight: 0,
            forwarded: 0,
            uplink_drops: 0,
        }
    }

    pub fn id(&self) -> ConcentratorId {
        self.cfg.id
    }

    pub fn config(&self) -> &ConcentratorConfig {
        &self.cfg
    }

    pub fn state(&self) -> ConcentratorState {
        ConcentratorState {
            uplink_ok: self.uplink_ok,
            queue_depth: self.in_flight,
        }
    }

    /// Stamps `msg` with the local reception time; the payload passes through untouched.
    pub fn receive(&self, msg: MeterMessage, true_time: Timestamp) -> ConcentratorReport {
        ConcentratorReport {
            message: msg,
            concentrator_id: self.cfg.id,
            rx_time: true_time.plus(self.cfg.clock_skew_ms),
            concentrator_state: self.state(),
        }
    }

    /// Attempts to hand a report to the uplink. Returns whether it will reach
    /// the center; nothing is buffered when the uplink drops it.
    pub fn forward<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let ok = match self.cfg.uplink {
            Uplink::Reliable => true,
            Uplink::Lossy(p) => rng.gen::<f64>() >= p,
        };
        self.uplink_ok = ok;
        if ok {
            self.in_flight += 1;
            self.forwarded += 1;
        } else {
            self.uplink_drops += 1;
        }
        ok
    }

    /// Called when a forwarded report has reached the center.
    pub fn delivered(&mut self) {
        self.in_flight = self.in_flight.saturating_sub(1);
    }
}
