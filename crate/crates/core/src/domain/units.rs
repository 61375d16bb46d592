//! Fixed-point quantities and simulation time.
//!
//! Every resource quantity is an integer count of deciunits (tenths of the
//! resource's base unit). Consumption integrated over time is kept as an
//! [`Amount`], which is exact for any piecewise-constant [`Rate`] sampled at
//! millisecond boundaries.

use std::fmt;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};

pub const MS_PER_SECOND: i64 = 1_000;
pub const MS_PER_MINUTE: i64 = 60 * MS_PER_SECOND;
pub const MS_PER_HOUR: i64 = 60 * MS_PER_MINUTE;
pub const MS_PER_DAY: i64 = 24 * MS_PER_HOUR;

/// Number of [`Amount`] units in one deciunit (one hour in milliseconds).
pub const AMOUNT_PER_DECIUNIT: u128 = MS_PER_HOUR as u128;

/// Milliseconds on the center-synchronized clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn ms(self) -> i64 {
        self.0
    }

    pub fn plus(self, ms: i64) -> Timestamp {
        Timestamp(self.0 + ms)
    }

    pub fn since(self, earlier: Timestamp) -> i64 {
        self.0 - earlier.0
    }

    /// Hour of day, with the simulation epoch at local midnight.
    pub fn hour_of_day(self) -> usize {
        (self.0.rem_euclid(MS_PER_DAY) / MS_PER_HOUR) as usize
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0;
        let sign = if ms < 0 { "-" } else { "" };
        let ms = ms.unsigned_abs();
        let days = ms / MS_PER_DAY as u64;
        let rem = ms % MS_PER_DAY as u64;
        write!(
            f,
            "{sign}{days}d{:02}:{:02}:{:02}.{:03}",
            rem / MS_PER_HOUR as u64,
            rem % MS_PER_HOUR as u64 / MS_PER_MINUTE as u64,
            rem % MS_PER_MINUTE as u64 / 1000,
            rem % 1000
        )
    }
}

/// A resource quantity in deciunits of the kind's base unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quantity(pub u64);

impl Quantity {
    pub const ZERO: Quantity = Quantity(0);

    pub const fn from_deciunits(d: u64) -> Self {
        Quantity(d)
    }

    pub const fn from_base_units(units: u64) -> Self {
        Quantity(units * 10)
    }

    pub fn deciunits(self) -> u64 {
        self.0
    }

    pub fn as_base_units(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn to_amount(self) -> Amount {
        Amount(self.0 as u128 * AMOUNT_PER_DECIUNIT)
    }

    pub fn times(self, n: u64) -> Quantity {
        Quantity(self.0 * n)
    }
}

impl Add for Quantity {
    type Output = Quantity;
    fn add(self, rhs: Quantity) -> Quantity {
        Quantity(self.0 + rhs.0)
    }
}

/// Exact integrated consumption: `rate (deciunits/h) × elapsed (ms)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(pub u128);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    /// Whole deciunits contained in this amount (rounded down).
    pub fn floor_quantity(self) -> Quantity {
        Quantity((self.0 / AMOUNT_PER_DECIUNIT) as u64)
    }

    pub fn as_base_units(self) -> f64 {
        self.0 as f64 / AMOUNT_PER_DECIUNIT as f64 / 10.0
    }

    pub fn saturating_sub(self, rhs: Amount) -> Amount {
        Amount(self.0.saturating_sub(rhs.0))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        self.0 -= rhs.0;
    }
}

/// Flow rate in deciunits per hour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rate(pub u64);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub fn deciunits_per_hour(self) -> u64 {
        self.0
    }

    /// Consumption at this rate over `ms` milliseconds.
    pub fn over(self, ms: i64) -> Amount {
        debug_assert!(ms >= 0);
        Amount(self.0 as u128 * ms as u128)
    }

    pub fn per_second(self, quantum: Quantity) -> f64 {
        self.0 as f64 / quantum.0 as f64 / 3600.0
    }
}
