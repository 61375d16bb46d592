//! Strict parsing of quantities with explicit units.
//!
//! Values are decimal strings converted exactly to integer deciunits or
//! milliseconds; anything that does not convert exactly is rejected.

use thiserror::Error;

use crate::domain::units::{MS_PER_DAY, MS_PER_HOUR, MS_PER_MINUTE, MS_PER_SECOND};
use crate::domain::{Quantity, Rate, ResourceKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UnitError {
    #[error("'{0}' is not a number followed by a unit")]
    Syntax(String),
    #[error("unit '{unit}' is not valid for {what}")]
    UnknownUnit { unit: String, what: String },
    #[error("'{0}' is negative")]
    Negative(String),
    #[error("'{0}' is not representable exactly (resolution is 0.1 base unit or 1 ms)")]
    Inexact(String),
    #[error("'{0}' is out of range")]
    Overflow(String),
}

/// Base units per named unit for a resource kind.
pub fn unit_factor(kind: ResourceKind, unit: &str) -> Option<u64> {
    use ResourceKind::*;
    match (kind, unit) {
        (ColdWater | HotWater, "ml") => Some(1),
        (ColdWater | HotWater, "L" | "l") => Some(1_000),
        (ColdWater | HotWater, "m3") => Some(1_000_000),
        (Electricity, "Wh") => Some(1),
        (Electricity, "kWh") => Some(1_000),
        (Electricity, "MWh") => Some(1_000_000),
        (Heat, "kcal") => Some(1),
        (Heat, "Mcal") => Some(1_000),
        (Heat, "Gcal") => Some(1_000_000),
        (Gas, "L" | "l") => Some(1),
        (Gas, "m3") => Some(1_000),
        (GenericSensor, "tick" | "ticks") => Some(1),
        _ => None,
    }
}

fn duration_factor(unit: &str) -> Option<i64> {
    match unit {
        "ms" => Some(1),
        "s" => Some(MS_PER_SECOND),
        "min" => Some(MS_PER_MINUTE),
        "h" => Some(MS_PER_HOUR),
        "d" => Some(MS_PER_DAY),
        _ => None,
    }
}

/// Splits "12.5 L" or "12.5L" into ("12.5", "L").
fn split(s: &str) -> Result<(&str, &str), UnitError> {
    let t = s.trim();
    let end = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '-' || c == '+'))
        .ok_or_else(|| UnitError::Syntax(s.to_string()))?;
    let (num, unit) = t.split_at(end);
    let unit = unit.trim_start();
    if num.is_empty() || unit.is_empty() || unit.contains(char::is_whitespace) {
        return Err(UnitError::Syntax(s.to_string()));
    }
    Ok((num, unit))
}

/// `num × scale` as an exact integer, for a plain decimal `num`.
fn scale_decimal(num: &str, scale: u128, original: &str) -> Result<u128, UnitError> {
    if num.starts_with('-') {
        return Err(UnitError::Negative(original.to_string()));
    }
    let num = num.strip_prefix('+').unwrap_or(num);
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    let digits_ok = |d: &str| d.chars().all(|c| c.is_ascii_digit());
    if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) || frac.len() > 30 {
        return Err(UnitError::Syntax(original.to_string()));
    }
    let overflow = || UnitError::Overflow(original.to_string());
    let mut value: u128 = 0;
    for c in int.chars().chain(frac.chars()) {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(c as u128 - '0' as u128))
            .ok_or_else(overflow)?;
    }
    let denom = 10u128.checked_pow(frac.len() as u32).ok_or_else(overflow)?;
    let scaled = value.checked_mul(scale).ok_or_else(overflow)?;
    if scaled % denom != 0 {
        return Err(UnitError::Inexact(original.to_string()));
    }
    Ok(scaled / denom)
}

/// Parses an amount of `kind`, e.g. "100 ml" or "1.5 kWh".
pub fn parse_quantity(kind: ResourceKind, s: &str) -> Result<Quantity, UnitError> {
    let (num, unit) = split(s)?;
    let factor = unit_factor(kind, unit).ok_or_else(|| UnitError::UnknownUnit {
        unit: unit.to_string(),
        what: kind.name().to_string(),
    })?;
    let d = scale_decimal(num, factor as u128 * 10, s)?;
    u64::try_from(d)
        .map(Quantity)
        .map_err(|_| UnitError::Overflow(s.to_string()))
}

/// Parses a duration, e.g. "24 h", "500 ms", "1.5 min".
pub fn parse_duration(s: &str) -> Result<i64, UnitError> {
    let (num, unit) = split(s)?;
    let factor = duration_factor(unit).ok_or_else(|| UnitError::UnknownUnit {
        unit: unit.to_string(),
        what: "a duration".to_string(),
    })?;
    let ms = scale_decimal(num, factor as u128, s)?;
    i64::try_from(ms).map_err(|_| UnitError::Overflow(s.to_string()))
}

/// Parses a flow rate of `kind`, e.g. "12 L/min", "14.4 kW", "30 kcal/h".
pub fn parse_rate(kind: ResourceKind, s: &str) -> Result<Rate, UnitError> {
    let (num, unit) = split(s)?;
    let unknown = || UnitError::UnknownUnit {
        unit: unit.to_string(),
        what: format!("a {} rate", kind.name()),
    };
    // power units for electricity: 1 W sustained for an hour is 1 Wh
    let (amount_unit, per) = match (kind, unit) {
        (ResourceKind::Electricity, "W") => ("Wh", "h"),
        (ResourceKind::Electricity, "kW") => ("kWh", "h"),
        (ResourceKind::Electricity, "MW") => ("MWh", "h"),
        _ => unit.split_once('/').ok_or_else(unknown)?,
    };
    let factor = unit_factor(kind, amount_unit).ok_or_else(unknown)?;
    let per_ms = duration_factor(per).ok_or_else(unknown)?;
    let per_hour = (MS_PER_HOUR / per_ms) as u128;
    let d = scale_decimal(num, factor as u128 * 10 * per_hour, s)?;
    u64::try_from(d)
        .map(Rate)
        .map_err(|_| UnitError::Overflow(s.to_string()))
}

/// Renders deciunits in the kind's base unit, e.g. "100 ml" or "2.5 kcal".
pub fn format_quantity(kind: ResourceKind, q: Quantity) -> String {
    let d = q.deciunits();
    if d.is_multiple_of(10) {
        format!("{} {}", d / 10, kind.base_unit())
    } else {
        format!("{}.{} {}", d / 10, d % 10, kind.base_unit())
    }
}

/// Renders milliseconds with the largest unit that divides them exactly.
pub fn format_duration(ms: i64) -> String {
    for (unit, f) in [
        ("d", MS_PER_DAY),
        ("h", MS_PER_HOUR),
        ("min", MS_PER_MINUTE),
        ("s", MS_PER_SECOND),
    ] {
        if ms != 0 && ms % f == 0 {
            return format!("{} {unit}", ms / f);
        }
    }
    format!("{ms} ms")
}
