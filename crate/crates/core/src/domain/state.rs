use bitflags::bitflags;
use serde::{Deserialize, Serialize};

/// Battery charge in half-percent steps, 0..=200.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BatteryLevel(u8);

impl BatteryLevel {
    pub const FULL: BatteryLevel = BatteryLevel(200);
    pub const EMPTY: BatteryLevel = BatteryLevel(0);

    pub fn from_half_percent(steps: u8) -> Option<Self> {
        (steps <= 200).then_some(BatteryLevel(steps))
    }

    /// Quantizes a charge fraction, rounding down so the level never overstates charge.
    pub fn from_fraction(fraction: f64) -> Self {
        let f = if fraction.is_nan() {
            0.0
        } else {
            fraction.clamp(0.0, 1.0)
        };
        BatteryLevel((f * 200.0).floor() as u8)
    }

    pub fn half_percent(self) -> u8 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        self.0 as f64 / 200.0
    }
}

bitflags! {
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
    pub struct StateFlags: u8 {
        const TAMPER = 0b0000_0001;
        const SENSOR_FAULT = 0b0000_0010;
        const CLOCKLESS_IDLE = 0b0000_0100;
    }
}

/// What a meter reports about itself alongside every message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeterState {
    pub battery: BatteryLevel,
    pub flags: StateFlags,
    /// ΔR events since installation (wraps with the 32-bit frame field).
    pub cumulative_quanta: u32,
}

impl MeterState {
    pub fn nominal() -> Self {
        MeterState {
            battery: BatteryLevel::FULL,
            flags: StateFlags::empty(),
            cumulative_quanta: 0,
        }
    }

    pub fn tampered(&self) -> bool {
        self.flags.contains(StateFlags::TAMPER)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_quantization() {
        assert_eq!(BatteryLevel::from_fraction(1.0), BatteryLevel::FULL);
        assert_eq!(BatteryLevel::from_fraction(0.0), BatteryLevel::EMPTY);
        assert_eq!(BatteryLevel::from_fraction(0.5).half_percent(), 100);
        assert_eq!(BatteryLevel::from_fraction(0.0049).half_percent(), 0);
        assert_eq!(BatteryLevel::from_fraction(1.7), BatteryLevel::FULL);
        assert!(BatteryLevel::from_half_percent(201).is_none());
    }
}
