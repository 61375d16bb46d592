//! JSON scenario files.
//!
//! Every physical quantity is a string with an explicit unit ("100 ml",
//! "24 h", "12 L/min"); bare numbers are accepted only for dimensionless
//! values such as probabilities and drift factors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::concentrator::{ConcentratorConfig, Uplink};
use crate::domain::{ConcentratorId, MeterId, Quantum, Rate, ResourceKind};
use crate::meter::{MeterConfig, QualityModel, DEFAULT_HEARTBEAT_MS};
use crate::sim::{BurstSpec, MeterSetup, Mode, Scenario, ScenarioError, TraceSource, TraceSpec};

use super::units::{parse_duration, parse_quantity, parse_rate, UnitError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}, column {column}: {msg}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{field}: {msg}")]
    Field { field: String, msg: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

impl ConfigError {
    fn field(field: impl Into<String>, msg: impl ToString) -> Self {
        ConfigError::Field {
            field: field.into(),
            msg: msg.to_string(),
        }
    }
}

/// Error loading a config from disk.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// ΔR used for a meter whose config names none.
pub fn default_quantum(kind: ResourceKind) -> Quantum {
    Quantum::default_for(kind)
}

/// The full default ΔR table.
pub fn default_quanta() -> BTreeMap<ResourceKind, Quantum> {
    ResourceKind::ALL.iter().map(|&k| (k, default_quantum(k))).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    horizon: String,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default)]
    poll_interval: Option<String>,
    #[serde(default)]
    uplink_delay: Option<String>,
    #[serde(default)]
    max_skew: Option<String>,
    #[serde(default)]
    detail_grid: Option<String>,
    /// Overrides of the default ΔR table, by kind.
    #[serde(default)]
    quanta: BTreeMap<ResourceKind, String>,
    #[serde(default)]
    meter_defaults: RawMeterDefaults,
    #[serde(default)]
    buildings: Vec<RawBuilding>,
    #[serde(default)]
    meters: Vec<RawMeter>,
    #[serde(default)]
    concentrators: Vec<RawConcentrator>,
    #[serde(default)]
    links: Vec<RawLink>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeterDefaults {
    heartbeat: Option<String>,
    battery_capacity: Option<f64>,
    tx_cost: Option<f64>,
    idle_drain_per_hour: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuilding {
    #[serde(default = "one")]
    count: u32,
    apartments: u32,
    kinds: Vec<ResourceKind>,
    concentrators: u32,
    #[serde(default = "one")]
    links_per_meter: u32,
    #[serde(default)]
    loss: f64,
    #[serde(default)]
    uplink: Option<RawUplink>,
    /// Trace spec per kind.
    traces: BTreeMap<ResourceKind, RawTrace>,
    #[serde(default)]
    trace_seed: u64,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeter {
    id: u64,
    kind: ResourceKind,
    #[serde(default)]
    quantum: Option<String>,
    #[serde(default)]
    heartbeat: Option<String>,
    #[serde(default)]
    max_flow: Option<String>,
    #[serde(default)]
    battery_capacity: Option<f64>,
    #[serde(default)]
    tx_cost: Option<f64>,
    #[serde(default)]
    idle_drain_per_hour: Option<f64>,
    #[serde(default)]
    drift_offset: f64,
    #[serde(default)]
    drift_rate: f64,
    #[serde(default)]
    count_when_dead: bool,
    trace: RawTrace,
    #[serde(default)]
    trace_seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConcentrator {
    id: u64,
    #[serde(default)]
    position: (i32, i32),
    #[serde(default)]
    clock_skew: Option<String>,
    #[serde(default)]
    uplink: Option<RawUplink>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawUplink {
    Reliable,
    Lossy(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    meter: u64,
    concentrator: u64,
    #[serde(default)]
    loss: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawTrace {
    Constant {
        rate: String,
    },
    Steps {
        points: Vec<(String, String)>,
    },
    Hourly {
        rates: Vec<String>,
    },
    Diurnal {
        daily_total: String,
        #[serde(default)]
        morning_peak_hour: Option<f64>,
        #[serde(default)]
        evening_peak_hour: Option<f64>,
        #[serde(default)]
        base_share: Option<f64>,
        #[serde(default)]
        day_jitter: Option<f64>,
    },
    Appliance {
        base_rate: String,
        #[serde(default)]
        bursts: Vec<RawBurst>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBurst {
    name: String,
    rate: String,
    duration: String,
    per_day: f64,
    earliest_hour: u32,
    latest_hour: u32,
}

fn unit_err(field: &str) -> impl Fn(UnitError) -> ConfigError + '_ {
    move |e| ConfigError::field(field, e)
}

fn duration(field: &str, s: &str) -> Result<i64, ConfigError> {
    parse_duration(s).map_err(unit_err(field))
}

fn rate(field: &str, kind: ResourceKind, s: &str) -> Result<Rate, ConfigError> {
    parse_rate(kind, s).map_err(unit_err(field))
}

fn probability(field: &str, p: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(ConfigError::field(field, format!("probability {p} outside [0, 1]")))
    }
}

fn uplink(field: &str, raw: &Option<RawUplink>) -> Result<Uplink, ConfigError> {
    match raw {
        None | Some(RawUplink::Reliable) => Ok(Uplink::Reliable),
        Some(RawUplink::Lossy(p)) => Ok(Uplink::Lossy(probability(field, *p)?)),
    }
}

fn trace_spec(field: &str, kind: ResourceKind, raw: &RawTrace) -> Result<TraceSpec, ConfigError> {
    Ok(match raw {
        RawTrace::Constant { rate: r } => TraceSpec::Constant {
            rate: rate(&format!("{field}.rate"), kind, r)?,
        },
        RawTrace::Steps { points } => TraceSpec::Steps {
            points: points
                .iter()
                .enumerate()
                .map(|(i, (t, r))| {
                    let f = format!("{field}.points[{i}]");
                    Ok((duration(&f, t)?, rate(&f, kind, r)?))
                })
                .collect::<Result<_, ConfigError>>()?,
        },
        RawTrace::Hourly { rates } => TraceSpec::Hourly {
            rates: rates
                .iter()
                .enumerate()
                .map(|(i, r)| rate(&format!("{field}.rates[{i}]"), kind, r))
                .collect::<Result<_, _>>()?,
        },
        RawTrace::Diurnal {
            daily_total,
            morning_peak_hour,
            evening_peak_hour,
            base_share,
            day_jitter,
        } => {
            let total = parse_quantity(kind, daily_total).map_err(unit_err(&format!("{field}.daily_total")))?;
            let TraceSpec::Diurnal {
                morning_peak_hour: m0,
                evening_peak_hour: e0,
                base_share: b0,
                day_jitter: j0,
                ..
            } = TraceSpec::diurnal(total)
            else {
                unreachable!()
            };
            TraceSpec::Diurnal {
                daily_total: total,
                morning_peak_hour: morning_peak_hour.unwrap_or(m0),
                evening_peak_hour: evening_peak_hour.unwrap_or(e0),
                base_share: base_share.unwrap_or(b0),
                day_jitter: day_jitter.unwrap_or(j0),
            }
        }
        RawTrace::Appliance { base_rate, bursts } => TraceSpec::Appliance {
            base_rate: rate(&format!("{field}.base_rate"), kind, base_rate)?,
            bursts: bursts
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let f = format!("{field}.bursts[{i}]");
                    Ok(BurstSpec {
                        name: b.name.clone(),
                        rate: rate(&format!("{f}.rate"), kind, &b.rate)?,
                        duration_ms: duration(&format!("{f}.duration"), &b.duration)?,
                        per_day: b.per_day,
                        earliest_hour: b.earliest_hour,
                        latest_hour: b.latest_hour,
                    })
                })
                .collect::<Result<_, ConfigError>>()?,
        },
    })
}

struct MeterDefaults {
    quanta: BTreeMap<ResourceKind, Quantum>,
    heartbeat_ms: i64,
    battery_capacity: Option<f64>,
    tx_cost: Option<f64>,
    idle_drain_per_hour: Option<f64>,
}

impl MeterDefaults {
    fn config(&self, id: MeterId, kind: ResourceKind) -> MeterConfig {
        let mut c = MeterConfig::new(id, kind);
        c.quantum = self.quanta[&kind];
        c.heartbeat_interval_ms = self.heartbeat_ms;
        if let Some(v) = self.battery_capacity {
            c.battery_capacity = v;
        }
        if let Some(v) = self.tx_cost {
            c.tx_cost = v;
        }
        if let Some(v) = self.idle_drain_per_hour {
            c.idle_drain_per_hour = v;
        }
        c
    }
}

fn quantum(field: &str, kind: ResourceKind, s: &str) -> Result<Quantum, ConfigError> {
    let q = parse_quantity(kind, s).map_err(unit_err(field))?;
    Quantum::new(q).ok_or_else(|| ConfigError::field(field, "quantum must be positive"))
}

/// Parses and validates a scenario from JSON text; `origin` names the source
/// in diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        path: origin.to_string(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    build(raw)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_scenario(&text, &path.display().to_string())?)
}

fn build(raw: RawConfig) -> Result<Scenario, ConfigError> {
    let mut sc = Scenario::new(raw.seed, duration("horizon", &raw.horizon)?);
    if let Some(d) = &raw.uplink_delay {
        sc.uplink_delay_ms = duration("uplink_delay", d)?;
    }
    if let Some(d) = &raw.max_skew {
        sc.max_skew_ms = duration("max_skew", d)?;
    }
    if let Some(d) = &raw.detail_grid {
        sc.grid_ms = duration("detail_grid", d)?;
    }
    let dt = raw
        .poll_interval
        .as_deref()
        .map(|d| duration("poll_interval", d))
        .transpose()?;
    sc.mode = match (raw.mode.as_deref().unwrap_or("ri"), dt) {
        ("ri", _) => Mode::Ri,
        ("ti", Some(dt_ms)) => Mode::Ti { dt_ms },
        ("both", Some(dt_ms)) => Mode::Both { dt_ms },
        ("ti" | "both", None) => return Err(ConfigError::field("poll_interval", "required for mode ti/both")),
        (other, _) => {
            return Err(ConfigError::field(
                "mode",
                format!("unknown mode '{other}' (ri, ti, both)"),
            ))
        }
    };

    let mut quanta = default_quanta();
    for (kind, s) in &raw.quanta {
        quanta.insert(*kind, quantum(&format!("quanta.{kind}"), *kind, s)?);
    }
    let d = &raw.meter_defaults;
    let defaults = MeterDefaults {
        quanta,
        heartbeat_ms: match &d.heartbeat {
            Some(h) => duration("meter_defaults.heartbeat", h)?,
            None => DEFAULT_HEARTBEAT_MS,
        },
        battery_capacity: d.battery_capacity,
        tx_cost: d.tx_cost,
        idle_drain_per_hour: d.idle_drain_per_hour,
    };

    let mut used_meters: BTreeSet<u64> = raw.meters.iter().map(|m| m.id).collect();
    let mut used_concs: BTreeSet<u64> = raw.concentrators.iter().map(|c| c.id).collect();

    for (i, m) in raw.meters.iter().enumerate() {
        let f = |name: &str| format!("meters[{i}] (M{}).{name}", m.id);
        let id = MeterId(m.id);
        let mut c = defaults.config(id, m.kind);
        if let Some(q) = &m.quantum {
            c.quantum = quantum(&f("quantum"), m.kind, q)?;
        }
        if let Some(h) = &m.heartbeat {
            c.heartbeat_interval_ms = duration(&f("heartbeat"), h)?;
        }
        if let Some(r) = &m.max_flow {
            c.max_flow = rate(&f("max_flow"), m.kind, r)?;
        }
        if let Some(v) = m.battery_capacity {
            c.battery_capacity = v;
        }
        if let Some(v) = m.tx_cost {
            c.tx_cost = v;
        }
        if let Some(v) = m.idle_drain_per_hour {
            c.idle_drain_per_hour = v;
        }
        c.drift_offset = m.drift_offset;
        c.drift_rate = m.drift_rate;
        c.count_when_dead = m.count_when_dead;
        let spec = trace_spec(&f("trace"), m.kind, &m.trace)?;
        sc.meters.push(MeterSetup {
            config: c,
            trace: TraceSource::Generated {
                spec,
                seed: m.trace_seed.unwrap_or(m.id),
            },
            quality: QualityModel::nominal(m.kind),
        });
    }
    for (i, c) in raw.concentrators.iter().enumerate() {
        let f = |name: &str| format!("concentrators[{i}] (C{}).{name}", c.id);
        let mut cfg = ConcentratorConfig::new(ConcentratorId(c.id));
        cfg.position = c.position;
        if let Some(s) = &c.clock_skew {
            cfg.clock_skew_ms = parse_signed_duration(&f("clock_skew"), s)?;
        }
        cfg.uplink = uplink(&f("uplink"), &c.uplink)?;
        sc.concentrators.push(cfg);
    }
    for (i, l) in raw.links.iter().enumerate() {
        let f = format!("links[{i}]");
        let p = probability(&format!("{f}.loss"), l.loss)?;
        sc.visibility
            .add_link(MeterId(l.meter), ConcentratorId(l.concentrator), p)
            .map_err(|e| ConfigError::field(&f, e))?;
    }

    let mut next_meter = used_meters.last().copied().unwrap_or(0) + 1;
    let mut next_conc = used_concs.last().copied().unwrap_or(0) + 1;
    for (bi, b) in raw.buildings.iter().enumerate() {
        let f = |name: &str| format!("buildings[{bi}].{name}");
        if b.apartments == 0 || b.kinds.is_empty() || b.concentrators == 0 {
            return Err(ConfigError::field(
                f("apartments"),
                "apartments, kinds and concentrators must be non-empty",
            ));
        }
        if b.links_per_meter == 0 || b.links_per_meter > b.concentrators {
            return Err(ConfigError::field(
                f("links_per_meter"),
                format!(
                    "must be between 1 and {} (the building's concentrators)",
                    b.concentrators
                ),
            ));
        }
        let loss = probability(&f("loss"), b.loss)?;
        let up = uplink(&f("uplink"), &b.uplink)?;
        let mut specs = BTreeMap::new();
        for kind in &b.kinds {
            let raw_trace = b
                .traces
                .get(kind)
                .ok_or_else(|| ConfigError::field(f("traces"), format!("no trace for kind {kind}")))?;
            specs.insert(*kind, trace_spec(&f(&format!("traces.{kind}")), *kind, raw_trace)?);
        }
        for copy in 0..b.count {
            let building_no = bi as i32 * 1000 + copy as i32;
            let conc_ids: Vec<ConcentratorId> = (0..b.concentrators)
                .map(|k| {
                    let id = ConcentratorId(next_conc);
                    used_concs.insert(next_conc);
                    next_conc += 1;
                    let mut cfg = ConcentratorConfig::new(id);
                    cfg.position = (building_no, k as i32);
                    cfg.uplink = up;
                    sc.concentrators.push(cfg);
                    id
                })
                .collect();
            let per_building = b.apartments as u64 * b.kinds.len() as u64;
            let mut j = 0u64;
            for _apt in 0..b.apartments {
                for kind in &b.kinds {
                    let id = MeterId(next_meter);
                    used_meters.insert(next_meter);
                    next_meter += 1;
                    // consecutive meters share a home concentrator, in equal groups
                    let home = (j * b.concentrators as u64 / per_building) as usize;
                    for k in 0..b.links_per_meter as usize {
                        let c = conc_ids[(home + k) % conc_ids.len()];
                        sc.visibility
                            .add_link(id, c, loss)
                            .map_err(|e| ConfigError::field(f("links_per_meter"), e))?;
                    }
                    sc.meters.push(MeterSetup {
                        config: defaults.config(id, *kind),
                        trace: TraceSource::Generated {
                            spec: specs[kind].clone(),
                            seed: b.trace_seed.wrapping_add(id.0),
                        },
                        quality: QualityModel::nominal(*kind),
                    });
                    j += 1;
                }
            }
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// Like [`parse_duration`] but allows a leading minus sign.
fn parse_signed_duration(field: &str, s: &str) -> Result<i64, ConfigError> {
    match s.trim().strip_prefix('-') {
        Some(rest) => Ok(-duration(field, rest)?),
        None => duration(field, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentrator::TopologyError;
    use crate::domain::Quantity;

    const MINIMAL: &str = r#"{
        "seed": 7,
        "horizon": "48 h",
        "meters": [{"id": 1, "kind": "cold_water", "trace": {"type": "constant", "rate": "0 L/h"}}],
        "concentrators": [{"id": 1}],
        "links": [{"meter": 1, "concentrator": 1}]
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let sc = parse_scenario(MINIMAL, "test").unwrap();
        assert_eq!(sc.horizon_ms, 48 * 3_600_000);
        assert_eq!(sc.mode, Mode::Ri);
        let m = &sc.meters[0].config;
        assert_eq!(m.quantum.delta_r(), Quantity::from_base_units(100));
        assert_eq!(m.heartbeat_interval_ms, 24 * 3_600_000);
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_scenario("{\n  \"seed\": 1,\n  \"horizon\": 5\n}", "x.json").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"sede\": 8");
        assert!(matches!(parse_scenario(&text, "t"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn bad_unit_names_field() {
        let text = MINIMAL.replace("\"0 L/h\"", "\"0 Wh/h\"");
        let err = parse_scenario(&text, "t").unwrap_err().to_string();
        assert!(err.contains("meters[0] (M1).trace.rate"), "{err}");
    }

    #[test]
    fn missing_link_names_meter() {
        let text = MINIMAL.replace("\"links\": [{\"meter\": 1, \"concentrator\": 1}]", "\"links\": []");
        let err = parse_scenario(&text, "t").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Scenario(ScenarioError::Topology(TopologyError::NoLink(MeterId(1))))
        ));
        assert!(err.to_string().contains("M1"));
    }

    #[test]
    fn building_template() {
        let text = r#"{
            "seed": 1, "horizon": "1 h",
            "buildings": [{
                "count": 2, "apartments": 50, "kinds": ["cold_water", "hot_water", "electricity"],
                "concentrators": 3, "links_per_meter": 2, "loss": 0.1,
                "traces": {
                    "cold_water": {"type": "diurnal", "daily_total": "150 L"},
                    "hot_water": {"type": "diurnal", "daily_total": "80 L"},
                    "electricity": {"type": "constant", "rate": "300 W"}
                }
            }]
        }"#;
        let sc = parse_scenario(text, "t").unwrap();
        assert_eq!(sc.meters.len(), 300);
        assert_eq!(sc.concentrators.len(), 6);
        assert_eq!(sc.visibility.link_count(), 600);
        // 150 meters x 2 links spread evenly over 3 concentrators
        let mut heard = BTreeMap::new();
        for m in &sc.meters {
            for l in sc.visibility.links(m.config.id) {
                *heard.entry(l.concentrator).or_insert(0) += 1;
            }
        }
        assert_eq!(heard.len(), 6);
        assert!(heard.values().all(|&n| n == 100), "{heard:?}");
    }

    #[test]
    fn quanta_override() {
        let text = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"quanta\": {\"cold_water\": \"50 ml\"}");
        let sc = parse_scenario(&text, "t").unwrap();
        assert_eq!(sc.meters[0].config.quantum.delta_r(), Quantity::from_base_units(50));
        let zero = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"quanta\": {\"cold_water\": \"0 ml\"}");
        assert!(parse_scenario(&zero, "t").is_err());
    }

    #[test]
    fn mode_needs_poll_interval() {
        let text = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"mode\": \"ti\"");
        assert!(parse_scenario(&text, "t").is_err());
        let text = MINIMAL.replace(
            "\"seed\": 7",
            "\"seed\": 7, \"mode\": \"both\", \"poll_interval\": \"1 h\"",
        );
        assert_eq!(
            parse_scenario(&text, "t").unwrap().mode,
            Mode::Both { dt_ms: 3_600_000 }
        );
    }
}
