//! Piecewise-constant consumption traces and their generators.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::units::{MS_PER_DAY, MS_PER_HOUR};
use crate::domain::{Amount, MeterId, Quantity, Rate, Timestamp};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace breakpoints must be strictly increasing (at {0})")]
    NotIncreasing(Timestamp),
    #[error("trace breakpoint {0} lies outside [0, horizon]")]
    OutOfRange(Timestamp),
    #[error("negative horizon")]
    NegativeHorizon,
    #[error("invalid trace spec: {0}")]
    InvalidSpec(String),
}

/// Ground-truth consumption of one meter: a rate that changes only at
/// breakpoints, integrable exactly over any millisecond window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsumptionTrace {
    meter_id: MeterId,
    starts: Vec<Timestamp>,
    rates: Vec<Rate>,
    /// Cumulative consumption at each breakpoint.
    prefix: Vec<Amount>,
    horizon: Timestamp,
}

impl ConsumptionTrace {
    /// `samples` are `(start, rate)` breakpoints; the rate before the first
    /// breakpoint is zero and the last rate holds until `horizon`.
    pub fn new(meter_id: MeterId, samples: Vec<(Timestamp, Rate)>, horizon_ms: i64) -> Result<Self, TraceError> {
        if horizon_ms < 0 {
            return Err(TraceError::NegativeHorizon);
        }
        let horizon = Timestamp(horizon_ms);
        let mut starts = vec![Timestamp::ZERO];
        let mut rates = vec![Rate::ZERO];
        for (t, r) in samples {
            if t < Timestamp::ZERO || t > horizon {
                return Err(TraceError::OutOfRange(t));
            }
            let last = *starts.last().unwrap();
            if t == Timestamp::ZERO && starts.len() == 1 {
                rates[0] = r;
                continue;
            }
            if t <= last {
                return Err(TraceError::NotIncreasing(t));
            }
            starts.push(t);
            rates.push(r);
        }
        let mut prefix = Vec::with_capacity(starts.len());
        let mut acc = Amount::ZERO;
        for i in 0..starts.len() {
            prefix.push(acc);
            let end = starts.get(i + 1).copied().unwrap_or(horizon);
            acc += rates[i].over(end.since(starts[i]));
        }
        Ok(ConsumptionTrace {
            meter_id,
            starts,
            rates,
            prefix,
            horizon,
        })
    }

    pub fn constant(meter_id: MeterId, rate: Rate, horizon_ms: i64) -> Self {
        Self::new(meter_id, vec![(Timestamp::ZERO, rate)], horizon_ms).expect("valid constant trace")
    }

    pub fn meter_id(&self) -> MeterId {
        self.meter_id
    }

    pub fn horizon(&self) -> Timestamp {
        self.horizon
    }

    pub fn segments(&self) -> impl Iterator<Item = (Timestamp, Timestamp, Rate)> + '_ {
        (0..self.starts.len()).map(move |i| {
            let end = self.starts.get(i + 1).copied().unwrap_or(self.horizon);
            (self.starts[i], end, self.rates[i])
        })
    }

    pub fn segment_count(&self) -> usize {
        self.starts.len()
    }

    fn segment_at(&self, t: Timestamp) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn rate_at(&self, t: Timestamp) -> Rate {
        if t < Timestamp::ZERO || t >= self.horizon {
            return Rate::ZERO;
        }
        self.rates[self.segment_at(t)]
    }

    /// Consumption in `[0, t]`, with `t` clamped to the horizon.
    pub fn cumulative(&self, t: Timestamp) -> Amount {
        let t = t.clamp(Timestamp::ZERO, self.horizon);
        let i = self.segment_at(t);
        self.prefix[i] + self.rates[i].over(t.since(self.starts[i]))
    }

    pub fn total(&self) -> Amount {
        self.cumulative(self.horizon)
    }

    pub fn between(&self, a: Timestamp, b: Timestamp) -> Amount {
        self.cumulative(b).saturating_sub(self.cumulative(a))
    }

    /// Earliest whole millisecond at which cumulative consumption reaches
    /// `target`, or `None` if the trace never gets there.
    pub fn time_reaching(&self, target: Amount) -> Option<Timestamp> {
        if target.is_zero() {
            return Some(Timestamp::ZERO);
        }
        if self.total() < target {
            return None;
        }
        let seg = self.prefix.partition_point(|&p| p < target) - 1;
        let need = (target - self.prefix[seg]).0;
        let rate = self.rates[seg].0 as u128;
        debug_assert!(rate > 0);
        let dt = need.div_ceil(rate);
        Some(self.starts[seg].plus(dt as i64))
    }

    /// The same trace with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> ConsumptionTrace {
        let samples = self
            .starts
            .iter()
            .zip(&self.rates)
            .map(|(&t, &r)| (t, Rate(r.0 * factor)))
            .collect();
        Self::new(self.meter_id, samples, self.horizon.0).expect("scaling keeps breakpoints")
    }

    /// The same consumption curve with extra breakpoints inserted.
    pub fn resegmented(&self, extra: &[Timestamp]) -> ConsumptionTrace {
        let mut points: BTreeMap<Timestamp, Rate> =
            self.starts.iter().copied().zip(self.rates.iter().copied()).collect();
        for &t in extra {
            if t > Timestamp::ZERO && t < self.horizon {
                points.entry(t).or_insert_with(|| self.rate_at(t));
            }
        }
        Self::new(self.meter_id, points.into_iter().collect(), self.horizon.0)
            .expect("resegmenting keeps breakpoints valid")
    }

    pub fn with_meter_id(mut self, meter_id: MeterId) -> Self {
        self.meter_id = meter_id;
        self
    }
}

/// One kind of recurring appliance use, superimposed as rectangular bursts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    pub name: String,
    pub rate: Rate,
    pub duration_ms: i64,
    /// Expected uses per day; the fractional part is a Bernoulli draw.
    pub per_day: f64,
    pub earliest_hour: u32,
    pub latest_hour: u32,
}

/// How a meter's ground-truth consumption is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceSpec {
    Constant {
        rate: Rate,
    },
    /// Explicit `(start_ms, rate)` breakpoints.
    Steps {
        points: Vec<(i64, Rate)>,
    },
    /// The same 24 hourly rates every day.
    Hourly {
        rates: Vec<Rate>,
    },
    /// Two-peak household pattern with seeded day-to-day variation.
    Diurnal {
        daily_total: Quantity,
        morning_peak_hour: f64,
        evening_peak_hour: f64,
        /// Share of the daily total spread evenly over all hours.
        base_share: f64,
        /// Relative amplitude of the per-day volume variation.
        day_jitter: f64,
    },
    /// Background rate plus randomly placed appliance bursts.
    Appliance {
        base_rate: Rate,
        bursts: Vec<BurstSpec>,
    },
}

impl TraceSpec {
    pub fn diurnal(daily_total: Quantity) -> Self {
        TraceSpec::Diurnal {
            daily_total,
            morning_peak_hour: 7.0,
            evening_peak_hour: 19.0,
            base_share: 0.1,
            day_jitter: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        match self {
            TraceSpec::Hourly { rates } if rates.len() != 24 => Err(TraceError::InvalidSpec(format!(
                "hourly trace needs 24 rates, got {}",
                rates.len()
            ))),
            TraceSpec::Diurnal {
                base_share,
                day_jitter,
                morning_peak_hour,
                evening_peak_hour,
                ..
            } => {
                if !(0.0..=1.0).contains(base_share) || !(0.0..1.0).contains(day_jitter) {
                    return Err(TraceError::InvalidSpec(
                        "base_share must be in [0,1] and day_jitter in [0,1)".into(),
                    ));
                }
                for h in [morning_peak_hour, evening_peak_hour] {
                    if !(0.0..24.0).contains(h) {
                        return Err(TraceError::InvalidSpec(format!("peak hour {h} outside [0,24)")));
                    }
                }
                Ok(())
            }
            TraceSpec::Appliance { bursts, .. } => {
                for b in bursts {
                    if b.duration_ms <= 0
                        || b.per_day < 0.0
                        || !b.per_day.is_finite()
                        || b.earliest_hour >= b.latest_hour
                        || b.latest_hour > 24
                    {
                        return Err(TraceError::InvalidSpec(format!("bad burst '{}'", b.name)));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Hourly weights of the two-peak pattern (sums to 1).
fn diurnal_weights(morning: f64, evening: f64, base_share: f64) -> [f64; 24] {
    let sigma = 1.5;
    let bump = |h: f64, centre: f64| {
        let mut d = (h - centre).abs();
        d = d.min(24.0 - d);
        (-0.5 * (d / sigma).powi(2)).exp()
    };
    let mut peaks = [0.0; 24];
    for (h, w) in peaks.iter_mut().enumerate() {
        let mid = h as f64 + 0.5;
        // evening use is heavier than morning use
        *w = bump(mid, morning) + 1.3 * bump(mid, evening);
    }
    let sum: f64 = peaks.iter().sum();
    let mut out = [0.0; 24];
    for h in 0..24 {
        out[h] = base_share / 24.0 + (1.0 - base_share) * peaks[h] / sum;
    }
    out
}

/// Builds a deterministic trace for `meter_id` from `spec`.
pub fn generate_trace(
    spec: &TraceSpec,
    meter_id: MeterId,
    horizon_ms: i64,
    seed: u64,
) -> Result<ConsumptionTrace, TraceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = (horizon_ms + MS_PER_DAY - 1).max(0) / MS_PER_DAY;
    let samples: Vec<(Timestamp, Rate)> = match spec {
        TraceSpec::Constant { rate } => vec![(Timestamp::ZERO, *rate)],
        TraceSpec::Steps { points } => points.iter().map(|&(t, r)| (Timestamp(t), r)).collect(),
        TraceSpec::Hourly { rates } => (0..days * 24)
            .map(|i| (Timestamp(i * MS_PER_HOUR), rates[(i % 24) as usize]))
            .collect(),
        TraceSpec::Diurnal {
            daily_total,
            morning_peak_hour,
            evening_peak_hour,
            base_share,
            day_jitter,
        } => {
            let w = diurnal_weights(*morning_peak_hour, *evening_peak_hour, *base_share);
            let mut out = Vec::with_capacity(days as usize * 24);
            for day in 0..days {
                let scale = 1.0 + day_jitter * rng.gen_range(-1.0..=1.0);
                for (h, wh) in w.iter().enumerate() {
                    let rate = (daily_total.0 as f64 * scale * wh).round() as u64;
                    out.push((Timestamp(day * MS_PER_DAY + h as i64 * MS_PER_HOUR), Rate(rate)));
                }
            }
            out
        }
        TraceSpec::Appliance { base_rate, bursts } => {
            let mut delta: BTreeMap<i64, i128> = BTreeMap::new();
            *delta.entry(0).or_default() += base_rate.0 as i128;
            for day in 0..days {
                for b in bursts {
                    let whole = b.per_day.floor() as u32;
                    let extra = rng.gen_bool(b.per_day.fract());
                    for _ in 0..whole + extra as u32 {
                        let lo = day * MS_PER_DAY + b.earliest_hour as i64 * MS_PER_HOUR;
                        let hi = day * MS_PER_DAY + b.latest_hour as i64 * MS_PER_HOUR;
                        let start = rng.gen_range(lo..hi);
                        let end = start + b.duration_ms;
                        *delta.entry(start).or_default() += b.rate.0 as i128;
                        *delta.entry(end).or_default() -= b.rate.0 as i128;
                    }
                }
            }
            let mut level: i128 = 0;
            let mut out = Vec::with_capacity(delta.len());
            for (t, d) in delta {
                level += d;
                if t >= horizon_ms {
                    break;
                }
                out.push((Timestamp(t), Rate(level as u64)));
            }
            out
        }
    };
    let samples = samples.into_iter().filter(|(t, _)| t.0 <= horizon_ms).fold(
        Vec::<(Timestamp, Rate)>::new(),
        |mut acc, (t, r)| {
            match acc.last() {
                Some(&(_, prev)) if prev == r => {}
                _ => acc.push((t, r)),
            }
            acc
        },
    );
    ConsumptionTrace::new(meter_id, samples, horizon_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::units::MS_PER_MINUTE;

    fn rate_per_hour_base(units: u64) -> Rate {
        Rate(units * 10)
    }

    #[test]
    fn constant_zero_is_all_zero() {
        let t = generate_trace(&TraceSpec::Constant { rate: Rate::ZERO }, MeterId(1), MS_PER_DAY, 1).unwrap();
        assert_eq!(t.total(), Amount::ZERO);
        assert_eq!(t.time_reaching(Amount(1)), None);
    }

    #[test]
    fn constant_total_is_rate_times_horizon() {
        let r = rate_per_hour_base(3_000);
        let t = ConsumptionTrace::constant(MeterId(1), r, 5 * MS_PER_HOUR);
        assert_eq!(t.total().floor_quantity(), Quantity::from_base_units(15_000));
        assert_eq!(t.total(), r.over(5 * MS_PER_HOUR));
    }

    #[test]
    fn crossing_time_is_exact_ceiling() {
        // 1 ml/ms = 3.6e6 ml/h; 100 ml reached at exactly 100 ms
        let t = ConsumptionTrace::constant(MeterId(1), rate_per_hour_base(3_600_000), MS_PER_HOUR);
        let q = Quantity::from_base_units(100).to_amount();
        assert_eq!(t.time_reaching(q), Some(Timestamp(100)));
        // 7 deci-ml/h: one deciunit is reached after ceil(3.6e6/7) ms
        let slow = ConsumptionTrace::constant(MeterId(1), Rate(7), MS_PER_DAY);
        let want = (3_600_000u128).div_ceil(7) as i64;
        assert_eq!(slow.time_reaching(Quantity(1).to_amount()), Some(Timestamp(want)));
        assert!(slow.cumulative(Timestamp(want)) >= Quantity(1).to_amount());
        assert!(slow.cumulative(Timestamp(want - 1)) < Quantity(1).to_amount());
    }

    #[test]
    fn crossing_skips_zero_segments() {
        let t = ConsumptionTrace::new(
            MeterId(1),
            vec![
                (Timestamp(0), Rate::ZERO),
                (Timestamp(MS_PER_HOUR), rate_per_hour_base(60_000)),
            ],
            2 * MS_PER_HOUR,
        )
        .unwrap();
        // 60 L/h = 1 L/min; 100 ml after 6 s of flow
        let q = Quantity::from_base_units(100).to_amount();
        assert_eq!(t.time_reaching(q), Some(Timestamp(MS_PER_HOUR + 6_000)));
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let r = Rate(1);
        assert!(ConsumptionTrace::new(MeterId(1), vec![(Timestamp(5), r), (Timestamp(5), r)], 10).is_err());
        assert!(ConsumptionTrace::new(MeterId(1), vec![(Timestamp(11), r)], 10).is_err());
        assert!(ConsumptionTrace::new(MeterId(1), vec![(Timestamp(-1), r)], 10).is_err());
    }

    #[test]
    fn resegmenting_preserves_curve() {
        let t = generate_trace(
            &TraceSpec::diurnal(Quantity::from_base_units(200_000)),
            MeterId(1),
            2 * MS_PER_DAY,
            9,
        )
        .unwrap();
        let extra: Vec<Timestamp> = (1..500).map(|i| Timestamp(i * 337 * MS_PER_MINUTE / 10)).collect();
        let r = t.resegmented(&extra);
        assert!(r.segment_count() > t.segment_count());
        for i in 0..200 {
            let at = Timestamp(i * 863_123);
            assert_eq!(t.cumulative(at), r.cumulative(at));
        }
    }

    #[test]
    fn diurnal_evening_exceeds_night() {
        let t = generate_trace(
            &TraceSpec::diurnal(Quantity::from_base_units(200_000)),
            MeterId(1),
            MS_PER_DAY,
            42,
        )
        .unwrap();
        let at = |h: i64| t.rate_at(Timestamp(h * MS_PER_HOUR + 1));
        assert!(at(18) > at(3));
        assert!(at(7) > at(3));
        // daily total lands within the jitter band
        let total = t.total().as_base_units();
        assert!((180_000.0..=220_000.0).contains(&total), "total {total}");
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = TraceSpec::Appliance {
            base_rate: Rate(5),
            bursts: vec![BurstSpec {
                name: "shower".into(),
                rate: rate_per_hour_base(540_000),
                duration_ms: 8 * MS_PER_MINUTE,
                per_day: 1.5,
                earliest_hour: 6,
                latest_hour: 9,
            }],
        };
        let a = generate_trace(&spec, MeterId(3), 10 * MS_PER_DAY, 77).unwrap();
        let b = generate_trace(&spec, MeterId(3), 10 * MS_PER_DAY, 77).unwrap();
        let c = generate_trace(&spec, MeterId(3), 10 * MS_PER_DAY, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.total() > Rate(5).over(10 * MS_PER_DAY));
    }

    #[test]
    fn scaled_doubles_total() {
        let t = generate_trace(
            &TraceSpec::diurnal(Quantity::from_base_units(1000)),
            MeterId(1),
            MS_PER_DAY,
            1,
        )
        .unwrap();
        assert_eq!(t.scaled(2).total().0, 2 * t.total().0);
    }
}
