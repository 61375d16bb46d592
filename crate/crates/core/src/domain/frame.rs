//! Wire encoding of [`MeterMessage`]. All multi-byte fields are little-endian.
//!
//! ```text
//! version:u8 | kind:u8 | message_type:u8 | meter_id:u64 | session:u32
//!   | quality:i16 × field_count(kind) | battery:u8 | flags:u8 | cumulative_quanta:u32
//! ```

use thiserror::Error;

use super::ids::{MeterId, SessionNumber};
use super::kind::ResourceKind;
use super::message::{MessageType, MeterMessage};
use super::quality::QualityVector;
use super::state::{BatteryLevel, MeterState, StateFlags};

pub const FRAME_VERSION: u8 = 1;

const HEADER_LEN: usize = 1 + 1 + 1 + 8 + 4;
const TRAILER_LEN: usize = 1 + 1 + 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("malformed frame: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> FrameError {
    FrameError::Malformed(msg.into())
}

/// Total frame length for a kind.
pub fn frame_len(kind: ResourceKind) -> usize {
    HEADER_LEN + 2 * QualityVector::field_count(kind) + TRAILER_LEN
}

pub fn encode_frame(msg: &MeterMessage) -> Vec<u8> {
    let kind = msg.kind();
    let mut out = Vec::with_capacity(frame_len(kind));
    out.push(FRAME_VERSION);
    out.push(kind.tag());
    out.push(msg.message_type.tag());
    out.extend_from_slice(&msg.meter_id.0.to_le_bytes());
    out.extend_from_slice(&msg.session.0.to_le_bytes());
    for v in msg.quality.deciunits() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(msg.state.battery.half_percent());
    out.push(msg.state.flags.bits());
    out.extend_from_slice(&msg.state.cumulative_quanta.to_le_bytes());
    debug_assert_eq!(out.len(), frame_len(kind));
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<MeterMessage, FrameError> {
    if bytes.len() < 3 {
        return Err(malformed(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[0] != FRAME_VERSION {
        return Err(malformed(format!("unsupported version {}", bytes[0])));
    }
    let kind =
        ResourceKind::from_tag(bytes[1]).ok_or_else(|| malformed(format!("unknown kind tag {:#04x}", bytes[1])))?;
    let message_type =
        MessageType::from_tag(bytes[2]).ok_or_else(|| malformed(format!("unknown message type {:#04x}", bytes[2])))?;
    let expected = frame_len(kind);
    if bytes.len() != expected {
        return Err(malformed(format!(
            "{kind} frame must be {expected} bytes, got {}",
            bytes.len()
        )));
    }

    let mut at = 3;
    let mut take = |n: usize| {
        let s = &bytes[at..at + n];
        at += n;
        s
    };
    let meter_id = MeterId(u64::from_le_bytes(take(8).try_into().unwrap()));
    let session = SessionNumber(u32::from_le_bytes(take(4).try_into().unwrap()));
    let fields: Vec<i16> = (0..QualityVector::field_count(kind))
        .map(|_| i16::from_le_bytes(take(2).try_into().unwrap()))
        .collect();
    let battery_raw = take(1)[0];
    let flags_raw = take(1)[0];
    let cumulative_quanta = u32::from_le_bytes(take(4).try_into().unwrap());

    let quality = QualityVector::from_deciunits(kind, &fields).map_err(|e| malformed(e.to_string()))?;
    let battery = BatteryLevel::from_half_percent(battery_raw)
        .ok_or_else(|| malformed(format!("battery byte {battery_raw} exceeds 200")))?;
    let flags = StateFlags::from_bits(flags_raw)
        .ok_or_else(|| malformed(format!("reserved flag bits set in {flags_raw:#010b}")))?;

    Ok(MeterMessage {
        meter_id,
        session,
        message_type,
        quality,
        state: MeterState {
            battery,
            flags,
            cumulative_quanta,
        },
    })
}
