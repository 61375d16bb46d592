use serde::{Deserialize, Serialize};

use super::ids::{ConcentratorId, MeterId, SessionNumber};
use super::kind::ResourceKind;
use super::quality::QualityVector;
use super::state::MeterState;
use super::units::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    QuantumEvent,
    Heartbeat,
}

impl MessageType {
    pub fn tag(self) -> u8 {
        match self {
            MessageType::QuantumEvent => 0,
            MessageType::Heartbeat => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(MessageType::QuantumEvent),
            1 => Some(MessageType::Heartbeat),
            _ => None,
        }
    }
}

/// One frame sent by a meter. Carries no timestamp: meters have no clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeterMessage {
    pub meter_id: MeterId,
    pub session: SessionNumber,
    pub message_type: MessageType,
    pub quality: QualityVector,
    pub state: MeterState,
}

impl MeterMessage {
    pub fn kind(&self) -> ResourceKind {
        self.quality.kind()
    }

    pub fn is_quantum(&self) -> bool {
        self.message_type == MessageType::QuantumEvent
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConcentratorState {
    pub uplink_ok: bool,
    /// Reports handed to the uplink and not yet delivered to the center.
    pub queue_depth: u32,
}

/// A meter message as forwarded by a concentrator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConcentratorReport {
    pub message: MeterMessage,
    pub concentrator_id: ConcentratorId,
    pub rx_time: Timestamp,
    pub concentrator_state: ConcentratorState,
}
