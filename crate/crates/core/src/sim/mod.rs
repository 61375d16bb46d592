//! Deterministic simulation of whole deployments.

pub mod engine;
pub mod events;
pub mod load;
pub mod metric;
pub mod scenario;
pub mod sweep;
pub mod trace;

pub use engine::{run, run_ri, run_ti, Emission, MeterTruth, RiOutcome, RunOptions, RunOutcome, SimError, TiOutcome};
pub use events::{DropReason, EventSink, IngestOutcome, NullSink, SimEvent};
pub use load::{load_bound, worst_case_load, LoadReport, Ratio};
pub use metric::{DetailMetric, MeterMetric};
pub use scenario::{MeterSetup, Mode, Scenario, ScenarioError, TraceSource};
pub use sweep::{apply_point, detail_sweep, SweepPoint, SweepRow, SweepValue};
pub use trace::{generate_trace, BurstSpec, ConsumptionTrace, TraceError, TraceSpec};
