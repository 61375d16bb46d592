//! Worst-case load: every meter at its maximum flow at once.

use crate::domain::units::MS_PER_HOUR;

use super::engine::{run, RunOptions, SimError};
use super::events::NullSink;
use super::scenario::{Mode, Scenario, TraceSource};
use super::trace::ConsumptionTrace;

/// Exact non-negative rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub fn new(num: u128, den: u128) -> Ratio {
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::ops::Add for Ratio {
    type Output = Ratio;

    fn add(self, other: Ratio) -> Ratio {
        let g = gcd(self.den, other.den);
        let den = self.den / g * other.den;
        Ratio::new(self.num * (den / self.den) + other.num * (den / other.den), den)
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadReport {
    /// Largest number of emissions in one bucket.
    pub peak_count: u64,
    pub bucket_ms: i64,
    /// Σ max_flow/ΔR over all meters, in messages per second.
    pub bound_per_sec: Ratio,
    pub total_messages: u64,
}

impl LoadReport {
    pub fn peak_per_sec(&self) -> f64 {
        self.peak_count as f64 * 1000.0 / self.bucket_ms as f64
    }

    /// Exact check of peak ≤ bound.
    pub fn within_bound(&self) -> bool {
        // peak_count / bucket_s <= num / den
        self.peak_count as u128 * 1000 * self.bound_per_sec.den <= self.bound_per_sec.num * self.bucket_ms as u128
    }
}

/// Analytic ceiling on the message rate of the whole fleet.
pub fn load_bound(scenario: &Scenario) -> Ratio {
    scenario.meters.iter().fold(Ratio::ZERO, |acc, m| {
        let q = m.config.quantum.delta_r().deciunits() as u128;
        acc + Ratio::new(m.config.max_flow.0 as u128, q * (MS_PER_HOUR as u128 / 1000))
    })
}

/// Replaces every trace with the meter's maximum flow and measures the peak
/// emission rate over aligned buckets of `bucket_ms`.
pub fn worst_case_load(scenario: &Scenario, bucket_ms: i64) -> Result<LoadReport, SimError> {
    let mut sc = scenario.clone();
    sc.mode = Mode::Ri;
    for m in &mut sc.meters {
        m.trace = TraceSource::Fixed(ConsumptionTrace::constant(
            m.config.id,
            m.config.max_flow,
            sc.horizon_ms,
        ));
    }
    let opts = RunOptions {
        retain_center: false,
        record_truth: false,
        bucket_ms,
    };
    let out = run(&sc, &mut NullSink, opts)?.ri.expect("Ri mode");
    Ok(LoadReport {
        peak_count: out.emission_buckets.iter().copied().max().unwrap_or(0),
        bucket_ms,
        bound_per_sec: load_bound(&sc),
        total_messages: out.metrics.iter().map(|m| m.detail.message_count).sum(),
    })
}
