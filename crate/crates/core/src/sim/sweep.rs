//! Detail-versus-traffic sweeps over the polling interval or the quantum.

use std::thread;

use crate::domain::{Quantity, Quantum};

use super::engine::{run, RunOptions, SimError};
use super::events::NullSink;
use super::metric::DetailMetric;
use super::scenario::{Mode, Scenario, ScenarioError};

#[derive(Clone, Debug, PartialEq)]
pub enum SweepValue {
    /// Polling interval of the baseline system.
    PollInterval { ms: i64 },
    /// Explicit quantum per meter, in scenario meter order.
    Quanta(Vec<Quantum>),
    /// Every meter's configured quantum times this factor.
    QuantumFactor(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub value: SweepValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub detail: DetailMetric,
}

/// Scenario variant for one sweep point.
pub fn apply_point(base: &Scenario, value: &SweepValue) -> Result<Scenario, ScenarioError> {
    let mut sc = base.clone();
    match value {
        SweepValue::PollInterval { ms } => {
            if *ms <= 0 {
                return Err(ScenarioError::PollInterval(*ms));
            }
            sc.mode = Mode::Ti { dt_ms: *ms };
        }
        SweepValue::Quanta(quanta) => {
            if quanta.len() != sc.meters.len() {
                return Err(ScenarioError::SweepValue(format!(
                    "{} quanta for {} meters",
                    quanta.len(),
                    sc.meters.len()
                )));
            }
            sc.mode = Mode::Ri;
            for (m, q) in sc.meters.iter_mut().zip(quanta) {
                m.config.quantum = *q;
            }
        }
        SweepValue::QuantumFactor(f) => {
            if !(f.is_finite() && *f > 0.0) {
                return Err(ScenarioError::SweepValue(format!("factor {f} must be positive")));
            }
            sc.mode = Mode::Ri;
            for m in &mut sc.meters {
                let scaled = (m.config.quantum.delta_r().deciunits() as f64 * f).round() as u64;
                m.config.quantum = Quantum::new(Quantity::from_deciunits(scaled)).ok_or_else(|| {
                    ScenarioError::SweepValue(format!("factor {f} rounds meter {} quantum to zero", m.config.id))
                })?;
            }
        }
    }
    Ok(sc)
}

/// One run per point on the same traces and channel seed; points run in
/// parallel, each with its own state.
pub fn detail_sweep(scenario: &Scenario, points: &[SweepPoint]) -> Result<Vec<SweepRow>, SimError> {
    let variants = points
        .iter()
        .map(|p| apply_point(scenario, &p.value))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = RunOptions {
        record_truth: false,
        ..RunOptions::default()
    };
    let results: Vec<Result<DetailMetric, SimError>> = thread::scope(|s| {
        let handles: Vec<_> = variants
            .iter()
            .map(|sc| {
                s.spawn(move || {
                    let out = run(sc, &mut NullSink, opts)?;
                    Ok(match (out.ri, out.ti) {
                        (Some(ri), _) => ri.detail(),
                        (None, Some(ti)) => ti.detail(),
                        (None, None) => DetailMetric::default(),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    points
        .iter()
        .zip(results)
        .map(|(p, r)| {
            r.map(|detail| SweepRow {
                label: p.label.clone(),
                detail,
            })
        })
        .collect()
}
