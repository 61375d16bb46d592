//! Hour-of-day consumption profile learned from accepted quantum events.

use thiserror::Error;

use crate::domain::units::{MS_PER_DAY, MS_PER_HOUR};
use crate::domain::{MessageType, MeterId, Timestamp};

use super::ledger::SessionLedger;

/// Additive smoothing so that no hour has zero weight.
pub const PROFILE_SMOOTHING: f64 = 1e-3;
/// Minimum span of accepted quantum events needed to learn a profile.
pub const MIN_PROFILE_SPAN_MS: i64 = MS_PER_DAY;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("insufficient data: accepted quantum events span {span_ms} ms, need {MIN_PROFILE_SPAN_MS} ms")]
    InsufficientData { span_ms: i64 },
    #[error("profile weights must be finite, non-negative and not all zero")]
    InvalidWeights,
}

/// Relative consumption intensity for each hour of the day; weights sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsumerProfile {
    meter_id: MeterId,
    weights: [f64; 24],
}

impl ConsumerProfile {
    pub fn from_weights(meter_id: MeterId, weights: [f64; 24]) -> Result<Self, ProfileError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ProfileError::InvalidWeights);
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(ProfileError::InvalidWeights);
        }
        Ok(ConsumerProfile {
            meter_id,
            weights: weights.map(|w| w / sum),
        })
    }

    pub fn uniform(meter_id: MeterId) -> Self {
        ConsumerProfile {
            meter_id,
            weights: [1.0 / 24.0; 24],
        }
    }

    pub fn meter_id(&self) -> MeterId {
        self.meter_id
    }

    pub fn weights(&self) -> &[f64; 24] {
        &self.weights
    }

    pub fn weight(&self, hour: usize) -> f64 {
        self.weights[hour % 24]
    }

    /// Profile mass over `[a, b)`, in day-fractions: a full day has mass 1.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for_each_hour_piece(a, b, |_, len, hour| {
            total += self.weights[hour] * len / MS_PER_HOUR as f64
        });
        total
    }

    /// Places `n` points at the mass quantiles `i/(n+1)` of `(a, b)`.
    pub(crate) fn quantile_points(&self, a: f64, b: f64, n: usize) -> Vec<f64> {
        if n == 0 {
            return Vec::new();
        }
        let total = self.mass_between(a, b);
        if total <= 0.0 {
            return uniform_points(a, b, n);
        }
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut next = 1;
        for_each_hour_piece(a, b, |start, len, hour| {
            let density = self.weights[hour] / MS_PER_HOUR as f64;
            let piece = density * len;
            while next <= n {
                let target = total * next as f64 / (n + 1) as f64;
                if target > acc + piece || density == 0.0 {
                    break;
                }
                out.push(start + (target - acc) / density);
                next += 1;
            }
            acc += piece;
        });
        // numerical leftovers land at the end of the interval
        while out.len() < n {
            out.push(b);
        }
        out
    }
}

pub(crate) fn uniform_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| a + (b - a) * i as f64 / (n + 1) as f64).collect()
}

/// Splits `[a, b)` at hour boundaries, calling `f(start, length, hour_of_day)`.
fn for_each_hour_piece(a: f64, b: f64, mut f: impl FnMut(f64, f64, usize)) {
    let hour = MS_PER_HOUR as f64;
    let mut t = a;
    while t < b {
        let idx = (t / hour).floor();
        let end = ((idx + 1.0) * hour).min(b);
        let h = (idx as i64).rem_euclid(24) as usize;
        f(t, end - t, h);
        if end <= t {
            break;
        }
        t = end;
    }
}

/// Learns the profile from the arrival hours of accepted quantum events.
pub fn build_profile(ledger: &SessionLedger) -> Result<ConsumerProfile, ProfileError> {
    let times: Vec<Timestamp> = ledger
        .accepted()
        .filter(|a| a.message_type() == MessageType::QuantumEvent)
        .map(|a| a.rx_time())
        .collect();
    let span_ms = match (times.iter().min(), times.iter().max()) {
        (Some(lo), Some(hi)) => hi.since(*lo),
        _ => 0,
    };
    if span_ms < MIN_PROFILE_SPAN_MS {
        return Err(ProfileError::InsufficientData { span_ms });
    }
    let mut counts = [0u64; 24];
    for t in &times {
        counts[t.hour_of_day()] += 1;
    }
    let n = times.len() as f64;
    let eps = PROFILE_SMOOTHING;
    let weights = counts.map(|c| (c as f64 / n + eps) / (1.0 + 24.0 * eps));
    ConsumerProfile::from_weights(ledger.meter_id(), weights)
}
