//! Shared vocabulary: identifiers, quantities, frames.

mod frame;
mod ids;
mod kind;
mod message;
mod quality;
mod registry;
mod state;
pub mod units;

pub use frame::{decode_frame, encode_frame, frame_len, FrameError, FRAME_VERSION};
pub use ids::{ConcentratorId, DeviceId, MeterId, SessionNumber};
pub use kind::{Quantum, ResourceKind};
pub use message::{ConcentratorReport, ConcentratorState, MessageType, MeterMessage};
pub use quality::{QualityError, QualityVector};
pub use registry::{MeterRecord, Registry, RegistryError};
pub use state::{BatteryLevel, MeterState, StateFlags};
pub use units::{Amount, Quantity, Rate, Timestamp};
