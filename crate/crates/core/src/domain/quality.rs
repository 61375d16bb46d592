//! Resource-quality readings carried in every frame.
//!
//! The schema is fixed per [`ResourceKind`]:
//!
//! | kind              | fields                          |
//! |-------------------|---------------------------------|
//! | electricity       | voltage (V), frequency (Hz)     |
//! | cold/hot water    | temperature (°C), pressure (kPa)|
//! | heat              | temperature (°C), pressure (kPa)|
//! | gas               | temperature (°C)                |
//! | generic sensor    | reading                         |
//!
//! Values are stored as signed deciunits so they fit an `i16` on the wire.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kind::ResourceKind;

#[derive(Debug, Error, PartialEq)]
pub enum QualityError {
    #[error("{kind} quality takes {expected} values, got {got}")]
    WrongArity {
        kind: ResourceKind,
        expected: usize,
        got: usize,
    },
    #[error("quality value {0} is not finite")]
    NonFinite(f64),
    #[error("quality value {0} does not fit a signed 16-bit deciunit field")]
    OutOfRange(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityVector {
    kind: ResourceKind,
    values: [i16; 2],
}

impl QualityVector {
    pub fn field_count(kind: ResourceKind) -> usize {
        match kind {
            ResourceKind::Gas | ResourceKind::GenericSensor => 1,
            _ => 2,
        }
    }

    pub fn field_names(kind: ResourceKind) -> &'static [&'static str] {
        match kind {
            ResourceKind::Electricity => &["voltage_v", "frequency_hz"],
            ResourceKind::ColdWater | ResourceKind::HotWater | ResourceKind::Heat => &["temperature_c", "pressure_kpa"],
            ResourceKind::Gas => &["temperature_c"],
            ResourceKind::GenericSensor => &["reading"],
        }
    }

    /// Builds a vector from physical values (e.g. `[20.0, 300.0]` for water).
    pub fn new(kind: ResourceKind, values: &[f64]) -> Result<Self, QualityError> {
        let expected = Self::field_count(kind);
        if values.len() != expected {
            return Err(QualityError::WrongArity {
                kind,
                expected,
                got: values.len(),
            });
        }
        let mut out = [0i16; 2];
        for (slot, &v) in out.iter_mut().zip(values) {
            if !v.is_finite() {
                return Err(QualityError::NonFinite(v));
            }
            let d = (v * 10.0).round();
            if d < i16::MIN as f64 || d > i16::MAX as f64 {
                return Err(QualityError::OutOfRange(v));
            }
            *slot = d as i16;
        }
        Ok(QualityVector { kind, values: out })
    }

    pub fn from_deciunits(kind: ResourceKind, values: &[i16]) -> Result<Self, QualityError> {
        let expected = Self::field_count(kind);
        if values.len() != expected {
            return Err(QualityError::WrongArity {
                kind,
                expected,
                got: values.len(),
            });
        }
        let mut out = [0i16; 2];
        out[..expected].copy_from_slice(values);
        Ok(QualityVector { kind, values: out })
    }

    /// Typical supply conditions for the kind.
    pub fn nominal(kind: ResourceKind) -> Self {
        let values: &[i16] = match kind {
            ResourceKind::ColdWater => &[100, 3000],
            ResourceKind::HotWater => &[600, 4000],
            ResourceKind::Electricity => &[2300, 500],
            ResourceKind::Heat => &[700, 6000],
            ResourceKind::Gas => &[150],
            ResourceKind::GenericSensor => &[0],
        };
        Self::from_deciunits(kind, values).expect("nominal arity matches schema")
    }

    pub fn kind(&self) -> ResourceKind {
        self.kind
    }

    pub fn deciunits(&self) -> &[i16] {
        &self.values[..Self::field_count(self.kind)]
    }

    pub fn values(&self) -> Vec<f64> {
        self.deciunits().iter().map(|&d| d as f64 / 10.0).collect()
    }

    pub fn temperature_c(&self) -> Option<f64> {
        match self.kind {
            ResourceKind::Electricity | ResourceKind::GenericSensor => None,
            _ => Some(self.values[0] as f64 / 10.0),
        }
    }

    pub fn pressure_kpa(&self) -> Option<f64> {
        match self.kind {
            ResourceKind::ColdWater | ResourceKind::HotWater | ResourceKind::Heat => Some(self.values[1] as f64 / 10.0),
            _ => None,
        }
    }

    pub fn voltage_v(&self) -> Option<f64> {
        (self.kind == ResourceKind::Electricity).then(|| self.values[0] as f64 / 10.0)
    }

    pub fn frequency_hz(&self) -> Option<f64> {
        (self.kind == ResourceKind::Electricity).then(|| self.values[1] as f64 / 10.0)
    }

    pub fn reading(&self) -> Option<f64> {
        (self.kind == ResourceKind::GenericSensor).then(|| self.values[0] as f64 / 10.0)
    }
}
