use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeterId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConcentratorId(pub u64);

impl MeterId {
    pub const PREFIX: u8 = b'M';
}

impl ConcentratorId {
    pub const PREFIX: u8 = b'C';
}

/// Any registered device; the prefix byte keeps the two numbering spaces apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeviceId {
    Meter(MeterId),
    Concentrator(ConcentratorId),
}

impl DeviceId {
    pub fn prefix(self) -> u8 {
        match self {
            DeviceId::Meter(_) => MeterId::PREFIX,
            DeviceId::Concentrator(_) => ConcentratorId::PREFIX,
        }
    }

    /// 9-byte namespaced key: prefix followed by the big-endian number.
    pub fn key(self) -> [u8; 9] {
        let n = match self {
            DeviceId::Meter(m) => m.0,
            DeviceId::Concentrator(c) => c.0,
        };
        let mut out = [0u8; 9];
        out[0] = self.prefix();
        out[1..].copy_from_slice(&n.to_be_bytes());
        out
    }
}

impl fmt::Display for MeterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

impl fmt::Display for ConcentratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// Per-meter message counter, wrapping modulo 2^32.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionNumber(pub u32);

impl SessionNumber {
    pub fn next(self) -> SessionNumber {
        SessionNumber(self.0.wrapping_add(1))
    }

    /// Signed distance from `self` to `later`, reading any backward jump of
    /// more than 2^31 as a forward wrap.
    pub fn forward_distance(self, later: SessionNumber) -> i64 {
        later.0.wrapping_sub(self.0) as i32 as i64
    }
}

impl fmt::Display for SessionNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_wraps() {
        assert_eq!(SessionNumber(u32::MAX).next(), SessionNumber(0));
        assert_eq!(SessionNumber(u32::MAX - 1).forward_distance(SessionNumber(1)), 3);
        assert_eq!(SessionNumber(5).forward_distance(SessionNumber(3)), -2);
    }

    #[test]
    fn namespaces_differ() {
        let m = DeviceId::Meter(MeterId(7));
        let c = DeviceId::Concentrator(ConcentratorId(7));
        assert_ne!(m.key(), c.key());
        assert_eq!(m.key()[0], b'M');
    }
}
