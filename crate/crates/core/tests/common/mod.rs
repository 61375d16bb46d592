#![allow(dead_code)]

use ri_monitor::concentrator::ConcentratorConfig;
use ri_monitor::domain::{ConcentratorId, MeterId, Rate, ResourceKind};
use ri_monitor::meter::{MeterConfig, QualityModel};
use ri_monitor::sim::{ConsumptionTrace, MeterSetup, Scenario, TraceSource, TraceSpec};

pub const H: i64 = 3_600_000;
pub const D: i64 = 24 * H;

/// Meters `1..=n` and concentrators `1..=c`; meter j's home concentrator is
/// chosen in equal consecutive groups and it also hears the next
/// `links - 1` concentrators.
pub fn building(
    seed: u64,
    horizon_ms: i64,
    meters: Vec<(ResourceKind, TraceSource)>,
    concentrators: u64,
    links: u64,
    loss: f64,
) -> Scenario {
    let mut sc = Scenario::new(seed, horizon_ms);
    let n = meters.len() as u64;
    for c in 1..=concentrators {
        sc.concentrators.push(ConcentratorConfig::new(ConcentratorId(c)));
    }
    for (j, (kind, trace)) in meters.into_iter().enumerate() {
        let id = MeterId(j as u64 + 1);
        let home = j as u64 * concentrators / n;
        for k in 0..links {
            sc.visibility
                .add_link(id, ConcentratorId((home + k) % concentrators + 1), loss)
                .unwrap();
        }
        sc.meters.push(MeterSetup {
            config: MeterConfig::new(id, kind),
            trace,
            quality: QualityModel::nominal(kind),
        });
    }
    sc
}

pub fn generated(spec: TraceSpec, seed: u64) -> TraceSource {
    TraceSource::Generated { spec, seed }
}

pub fn constant(rate: Rate, horizon_ms: i64) -> TraceSource {
    TraceSource::Fixed(ConsumptionTrace::constant(MeterId(0), rate, horizon_ms))
}

/// Base units per hour to a rate.
pub fn per_hour(base_units: u64) -> Rate {
    Rate(base_units * 10)
}
