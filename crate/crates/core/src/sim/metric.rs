//! Detail metric: how closely a reconstructed cumulative curve follows the truth.

use crate::domain::units::AMOUNT_PER_DECIUNIT;
use crate::domain::{MeterId, Quantity, ResourceKind, Timestamp};

use super::trace::ConsumptionTrace;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetailMetric {
    /// Root-mean-square gap between true and reconstructed cumulative
    /// consumption on the sampling grid, in base units.
    pub rmse: f64,
    pub message_count: u64,
    pub bytes_sent: u64,
}

impl DetailMetric {
    /// Fleet-level metric: rmse is the quadratic mean of per-meter rmse,
    /// counts are summed.
    pub fn aggregate<'a>(items: impl IntoIterator<Item = &'a DetailMetric>) -> DetailMetric {
        let mut n = 0usize;
        let mut sq = 0.0;
        let mut out = DetailMetric::default();
        for m in items {
            n += 1;
            sq += m.rmse * m.rmse;
            out.message_count += m.message_count;
            out.bytes_sent += m.bytes_sent;
        }
        if n > 0 {
            out.rmse = (sq / n as f64).sqrt();
        }
        out
    }
}

/// Per-meter results of one system (Ri or Ti) over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct MeterMetric {
    pub meter_id: MeterId,
    pub kind: ResourceKind,
    pub detail: DetailMetric,
    /// Battery charge spent over the horizon, in transmission-cost units.
    pub battery_used: f64,
    pub battery_capacity: f64,
}

impl MeterMetric {
    /// Battery life extrapolated from the spend rate over `horizon_ms`;
    /// `None` when nothing was spent.
    pub fn lifetime_estimate_ms(&self, horizon_ms: i64) -> Option<f64> {
        (self.battery_used > 0.0 && horizon_ms > 0)
            .then(|| self.battery_capacity / self.battery_used * horizon_ms as f64)
    }
}

/// Grid points `0, g, 2g, …` up to and including `horizon`.
pub fn grid(horizon: Timestamp, grid_ms: i64) -> impl Iterator<Item = Timestamp> {
    (0..=horizon.0.max(-1) / grid_ms).map(move |k| Timestamp(k * grid_ms))
}

/// rmse of a step reconstruction against the true trace. `steps` are the
/// times (ms, ascending) at which the reconstruction rises and the cumulative
/// value, in deciunits, it reaches there.
pub fn step_rmse(trace: &ConsumptionTrace, grid_ms: i64, steps: &[(f64, u64)]) -> f64 {
    let mut i = 0;
    let mut level = 0u64;
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in grid(trace.horizon(), grid_ms) {
        while i < steps.len() && steps[i].0 <= t.0 as f64 {
            level = steps[i].1;
            i += 1;
        }
        let truth = trace.cumulative(t).0 as f64 / AMOUNT_PER_DECIUNIT as f64;
        let err = (truth - level as f64) / 10.0;
        sum += err * err;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Steps of an Ri reconstruction: one quantum at each given time.
pub fn quantum_steps(times: &[f64], quantum: Quantity) -> Vec<(f64, u64)> {
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, (i as u64 + 1) * quantum.deciunits()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::units::MS_PER_HOUR;
    use crate::domain::Rate;

    #[test]
    fn exact_reconstruction_has_zero_rmse() {
        // 1 base unit per minute, sampled every minute
        let trace = ConsumptionTrace::constant(MeterId(1), Rate(600), MS_PER_HOUR);
        let steps: Vec<(f64, u64)> = (1..=60).map(|k| ((k * 60_000) as f64, k as u64 * 10)).collect();
        assert_eq!(step_rmse(&trace, 60_000, &steps), 0.0);
    }

    #[test]
    fn missing_reconstruction_errs_by_truth() {
        let trace = ConsumptionTrace::constant(MeterId(1), Rate(600), 2 * 60_000);
        // truth on the grid: 0, 1, 2 base units
        let rmse = step_rmse(&trace, 60_000, &[]);
        assert!((rmse - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn aggregate_is_quadratic_mean() {
        let a = DetailMetric {
            rmse: 3.0,
            message_count: 2,
            bytes_sent: 50,
        };
        let b = DetailMetric {
            rmse: 4.0,
            message_count: 1,
            bytes_sent: 25,
        };
        let agg = DetailMetric::aggregate([&a, &b]);
        assert!((agg.rmse - (12.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(agg.message_count, 3);
        assert_eq!(agg.bytes_sent, 75);
    }
}
