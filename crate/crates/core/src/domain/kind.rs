use std::fmt;

use serde::{Deserialize, Serialize};

use super::units::Quantity;

/// The resource a meter measures. Concentrators never look at this.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    ColdWater,
    HotWater,
    Electricity,
    Heat,
    Gas,
    GenericSensor,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 6] = [
        ResourceKind::ColdWater,
        ResourceKind::HotWater,
        ResourceKind::Electricity,
        ResourceKind::Heat,
        ResourceKind::Gas,
        ResourceKind::GenericSensor,
    ];

    pub fn tag(self) -> u8 {
        match self {
            ResourceKind::ColdWater => 0,
            ResourceKind::HotWater => 1,
            ResourceKind::Electricity => 2,
            ResourceKind::Heat => 3,
            ResourceKind::Gas => 4,
            ResourceKind::GenericSensor => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    /// Canonical base unit symbol.
    pub fn base_unit(self) -> &'static str {
        match self {
            ResourceKind::ColdWater | ResourceKind::HotWater => "ml",
            ResourceKind::Electricity => "Wh",
            ResourceKind::Heat => "kcal",
            ResourceKind::Gas => "L",
            ResourceKind::GenericSensor => "tick",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResourceKind::ColdWater => "cold_water",
            ResourceKind::HotWater => "hot_water",
            ResourceKind::Electricity => "electricity",
            ResourceKind::Heat => "heat",
            ResourceKind::Gas => "gas",
            ResourceKind::GenericSensor => "generic_sensor",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// ΔR: the amount of resource whose passage through a meter triggers one message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Quantum(Quantity);

impl Quantum {
    pub fn new(delta_r: Quantity) -> Option<Self> {
        (delta_r.0 > 0).then_some(Quantum(delta_r))
    }

    pub fn delta_r(self) -> Quantity {
        self.0
    }

    /// Deployment defaults: water 100 ml, electricity 10 Wh, heat 5 kcal.
    /// Gas (10 L) and generic sensors (1 tick) are our own choices.
    pub fn default_for(kind: ResourceKind) -> Quantum {
        let base_units = match kind {
            ResourceKind::ColdWater | ResourceKind::HotWater => 100,
            ResourceKind::Electricity => 10,
            ResourceKind::Heat => 5,
            ResourceKind::Gas => 10,
            ResourceKind::GenericSensor => 1,
        };
        Quantum(Quantity::from_base_units(base_units))
    }
}

impl TryFrom<u64> for Quantum {
    type Error = String;
    fn try_from(d: u64) -> Result<Self, Self::Error> {
        Quantum::new(Quantity(d)).ok_or_else(|| "quantum must be positive".to_owned())
    }
}

impl From<Quantum> for u64 {
    fn from(q: Quantum) -> u64 {
        q.0 .0
    }
}
