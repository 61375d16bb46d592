//! Drift estimation against trusted reference readings.

use thiserror::Error;

use crate::domain::{Quantity, Quantum, Timestamp};

use super::ledger::SessionLedger;
use super::reconstruct::{quantum_times, Interpolation};

/// Minimum number of quanta between the first and last checkpoint.
pub const MIN_DRIFT_QUANTA: u64 = 1000;

/// A trusted reading of the true cumulative consumption, e.g. a manual read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub time: Timestamp,
    pub reading: Quantity,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DriftError {
    #[error("insufficient data: need at least 2 checkpoints, got {0}")]
    TooFewCheckpoints(usize),
    #[error("insufficient data: {got} quanta between checkpoints, need {MIN_DRIFT_QUANTA}")]
    TooFewQuanta { got: u64 },
    #[error("checkpoints must be in increasing time order")]
    Unordered,
}

/// Least-squares scale `s` such that `true ≈ s · reconstructed`, fitted
/// through the origin on increments since the first checkpoint.
pub fn correct_drift(ledger: &SessionLedger, quantum: Quantum, checkpoints: &[Checkpoint]) -> Result<f64, DriftError> {
    if checkpoints.len() < 2 {
        return Err(DriftError::TooFewCheckpoints(checkpoints.len()));
    }
    if checkpoints.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(DriftError::Unordered);
    }
    let times = quantum_times(ledger, Interpolation::Uniform);
    let quanta_at = |t: Timestamp| times.partition_point(|&x| x <= t.0 as f64) as u64;
    let q0 = quanta_at(checkpoints[0].time);
    let span = quanta_at(checkpoints[checkpoints.len() - 1].time) - q0;
    if span < MIN_DRIFT_QUANTA {
        return Err(DriftError::TooFewQuanta { got: span });
    }
    let dr = quantum.delta_r().deciunits() as f64;
    let r0 = checkpoints[0].reading.deciunits() as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for c in &checkpoints[1..] {
        let x = (quanta_at(c.time) - q0) as f64 * dr;
        let y = c.reading.deciunits() as f64 - r0;
        sxy += x * y;
        sxx += x * x;
    }
    Ok(sxy / sxx)
}
