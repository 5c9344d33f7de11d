//! Declarative scenarios and their TOML file format.
//!
//! A scenario file has four kinds of sections:
//!
//! ```toml
//! [scenario]            # name, duration, dt, seed
//! [network]             # topology = "precedent" | "ego" | "none", delay, ...
//! [controller.cacc]     # optional CACC gains (defaults apply)
//! [controller.das]      # optional warning parameters plus the ego id
//! [vehicle.<id>]        # initial pose, dimensions, actuator limits
//! [vehicle.<id>.behavior]
//! ```
//!
//! Parsing is strict: unknown keys are errors.

pub mod behavior;
pub mod profile;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cacc::CaccParams;
use crate::das::DasParams;
use crate::network::DEFAULT_RANGE;
use crate::vehicle::{ActuatorLimits, VehicleId, VehicleState};

pub use behavior::{LaneChange, ScriptedEgo, StoppedLead};
pub use profile::{profile_tracking_accel, SpeedProfile};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario field `{field}`: {message}")]
    Semantic { field: String, message: String },
    #[error("unknown built-in scenario `{0}`")]
    UnknownBuiltin(String),
}

impl ScenarioError {
    pub fn semantic(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError::Semantic { field: field.into(), message: message.to_string() }
    }
}

fn default_gain() -> f64 {
    1.0
}

fn default_stop_range() -> f64 {
    behavior::STOPPED_LEAD_RANGE
}

fn default_cut_in_range() -> f64 {
    behavior::LANE_CHANGE_RANGE
}

fn default_range() -> f64 {
    DEFAULT_RANGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Zero acceleration command.
    Idle,
    /// Tracks a speed profile; used for platoon leaders and the scripted ego.
    Profile {
        profile: SpeedProfile,
        #[serde(default = "default_gain")]
        gain: f64,
        #[serde(default)]
        brake_on_warning: bool,
    },
    /// CACC follower of the vehicle it receives messages from.
    Cacc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<CaccParams>,
    },
    /// Cruises, then brakes to a stop when `watch` closes in from behind.
    StoppedLead {
        cruise_speed: f64,
        watch: VehicleId,
        #[serde(default = "default_stop_range")]
        trigger_range: f64,
        #[serde(default = "default_gain")]
        gain: f64,
    },
    /// Cruises, then moves into `watch`'s lane when it approaches from
    /// behind in another lane.
    LaneChange {
        cruise_speed: f64,
        watch: VehicleId,
        #[serde(default = "default_cut_in_range")]
        trigger_range: f64,
        #[serde(default = "default_gain")]
        gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    /// No links at all.
    None,
    /// Chain in `order` (front to back); each vehicle hears its predecessor.
    Precedent { delay: f64, order: Vec<VehicleId> },
    /// Everyone transmits to `ego`, which only listens.
    Ego {
        delay: f64,
        ego: VehicleId,
        #[serde(default = "default_range")]
        range: f64,
    },
}

impl NetworkSpec {
    pub fn delay(&self) -> Option<f64> {
        match self {
            NetworkSpec::None => None,
            NetworkSpec::Precedent { delay, .. } | NetworkSpec::Ego { delay, .. } => Some(*delay),
        }
    }

    pub fn set_delay(&mut self, value: f64) {
        match self {
            NetworkSpec::None => {}
            NetworkSpec::Precedent { delay, .. } | NetworkSpec::Ego { delay, .. } => *delay = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DasConfig {
    pub ego: VehicleId,
    #[serde(default = "DasConfig::default_beta")]
    pub beta: f64,
    #[serde(default = "DasConfig::default_d_mls")]
    pub d_mls: f64,
    #[serde(default = "DasConfig::default_d_min")]
    pub d_min: f64,
    #[serde(default = "DasConfig::default_t_r")]
    pub t_r: f64,
    #[serde(default = "DasConfig::default_a_f")]
    pub a_f: f64,
    #[serde(default = "DasConfig::default_a_l")]
    pub a_l: f64,
}

impl DasConfig {
    pub fn with_defaults(ego: VehicleId) -> Self {
        let d = DasParams::default();
        Self { ego, beta: d.beta, d_mls: d.d_mls, d_min: d.d_min, t_r: d.t_r, a_f: d.a_f, a_l: d.a_l }
    }

    pub fn params(&self) -> DasParams {
        DasParams { beta: self.beta, d_mls: self.d_mls, d_min: self.d_min, t_r: self.t_r, a_f: self.a_f, a_l: self.a_l }
    }

    fn default_beta() -> f64 {
        DasParams::default().beta
    }
    fn default_d_mls() -> f64 {
        DasParams::default().d_mls
    }
    fn default_d_min() -> f64 {
        DasParams::default().d_min
    }
    fn default_t_r() -> f64 {
        DasParams::default().t_r
    }
    fn default_a_f() -> f64 {
        DasParams::default().a_f
    }
    fn default_a_l() -> f64 {
        DasParams::default().a_l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub initial: VehicleState,
    pub limits: ActuatorLimits,
    pub behavior: Behavior,
}

impl VehicleSpec {
    pub fn id(&self) -> VehicleId {
        self.initial.id
    }
}

/// A validated scenario. Construct through [`Scenario::from_toml_str`],
/// [`load_scenario`] or [`Scenario::builtin`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    /// Sorted by id.
    pub vehicles: Vec<VehicleSpec>,
    pub network: NetworkSpec,
    pub cacc: CaccParams,
    pub das: Option<DasConfig>,
}

// On-disk layout.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: ScenarioSection,
    network: NetworkSpec,
    #[serde(default)]
    controller: ControllerSection,
    vehicle: BTreeMap<String, VehicleSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: String,
    duration: f64,
    dt: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cacc: Option<CaccParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    das: Option<DasConfig>,
}

fn default_width() -> f64 {
    1.8
}
fn default_length() -> f64 {
    4.5
}
fn default_a_max() -> f64 {
    ActuatorLimits::default().a_max
}
fn default_a_min() -> f64 {
    ActuatorLimits::default().a_min
}
fn default_blend() -> f64 {
    ActuatorLimits::default().lane_blend_duration
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    x: f64,
    y: f64,
    #[serde(default)]
    yaw: f64,
    #[serde(default)]
    speed: f64,
    #[serde(default = "default_width")]
    width: f64,
    #[serde(default = "default_length")]
    length: f64,
    #[serde(default = "default_a_max")]
    a_max: f64,
    #[serde(default = "default_a_min")]
    a_min: f64,
    #[serde(default = "default_blend")]
    lane_blend_duration: f64,
    behavior: Behavior,
}

const BUILTINS: &[(&str, &str)] = &[
    ("delay_sweep", include_str!("../../fixtures/delay_sweep.toml")),
    ("platoon4", include_str!("../../fixtures/platoon4.toml")),
    ("stopped_lead", include_str!("../../fixtures/stopped_lead.toml")),
    ("lane_change", include_str!("../../fixtures/lane_change.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    Scenario::from_toml_str(&text)
}

impl Scenario {
    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) =
            BUILTINS.iter().find(|(n, _)| *n == name).ok_or_else(|| ScenarioError::UnknownBuiltin(name.to_string()))?;
        Self::from_toml_str(text)
    }

    /// A file path if one exists there, else a built-in fixture name.
    pub fn resolve(spec: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(spec);
        if path.exists() || builtin_names().all(|n| n != spec) {
            load_scenario(path)
        } else {
            Self::builtin(spec)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let scenario = Self::from_file(file)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ScenarioFile {
            scenario: ScenarioSection {
                name: self.name.clone(),
                duration: self.duration,
                dt: self.dt,
                seed: self.seed,
            },
            network: self.network.clone(),
            controller: ControllerSection { cacc: Some(self.cacc), das: self.das },
            vehicle: self
                .vehicles
                .iter()
                .map(|v| {
                    let s = &v.initial;
                    let section = VehicleSection {
                        x: s.x,
                        y: s.y,
                        yaw: s.yaw,
                        speed: s.v,
                        width: s.width,
                        length: s.length,
                        a_max: v.limits.a_max,
                        a_min: v.limits.a_min,
                        lane_blend_duration: v.limits.lane_blend_duration,
                        behavior: v.behavior.clone(),
                    };
                    (s.id.to_string(), section)
                })
                .collect(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }

    fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut vehicles = Vec::with_capacity(file.vehicle.len());
        let mut seen = BTreeSet::new();
        for (key, v) in file.vehicle {
            let id: u32 = key.parse().map_err(|_| {
                ScenarioError::semantic(format!("vehicle.{key}"), "vehicle ids must be non-negative integers")
            })?;
            let id = VehicleId(id);
            if !seen.insert(id) {
                return Err(ScenarioError::semantic(format!("vehicle.{key}"), format!("duplicate vehicle id {id}")));
            }
            vehicles.push(VehicleSpec {
                initial: VehicleState::new(id, v.x, v.y, v.yaw, v.speed, v.width, v.length),
                limits: ActuatorLimits { a_max: v.a_max, a_min: v.a_min, lane_blend_duration: v.lane_blend_duration },
                behavior: v.behavior,
            });
        }
        vehicles.sort_by_key(|v| v.id());
        Ok(Self {
            name: file.scenario.name,
            duration: file.scenario.duration,
            dt: file.scenario.dt,
            seed: file.scenario.seed,
            vehicles,
            network: file.network,
            cacc: file.controller.cacc.unwrap_or_default(),
            das: file.controller.das,
        })
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleSpec> {
        self.vehicles.iter().find(|v| v.id() == id)
    }

    pub fn ids(&self) -> Vec<VehicleId> {
        self.vehicles.iter().map(|v| v.id()).collect()
    }

    pub fn tick_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ScenarioError::semantic(
                "scenario.duration",
                format!("must be positive, got {}", self.duration),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ScenarioError::semantic("scenario.dt", format!("must be positive, got {}", self.dt)));
        }
        if self.vehicles.is_empty() {
            return Err(ScenarioError::semantic("vehicle", "at least one vehicle is required"));
        }
        let ids: BTreeSet<VehicleId> = self.ids().into_iter().collect();
        if ids.len() != self.vehicles.len() {
            return Err(ScenarioError::semantic("vehicle", "vehicle ids must be unique"));
        }
        self.cacc.validate().map_err(|e| ScenarioError::semantic("controller.cacc", e))?;
        if let Some(das) = &self.das {
            das.params().validate().map_err(|e| ScenarioError::semantic("controller.das", e))?;
            if !ids.contains(&das.ego) {
                return Err(ScenarioError::semantic("controller.das.ego", format!("unknown vehicle {}", das.ego)));
            }
        }
        for v in &self.vehicles {
            let field = format!("vehicle.{}", v.id());
            v.initial.validate().map_err(|e| ScenarioError::semantic(&field, e))?;
            v.limits.validate().map_err(|e| ScenarioError::semantic(&field, e))?;
        }
        // behaviors reference the network order, so it must be sound first
        self.validate_network(&ids)?;
        for v in &self.vehicles {
            self.validate_behavior(v, &ids, &format!("vehicle.{}", v.id()))?;
        }
        Ok(())
    }

    fn validate_behavior(&self, v: &VehicleSpec, ids: &BTreeSet<VehicleId>, field: &str) -> Result<(), ScenarioError> {
        let field = format!("{field}.behavior");
        let positive = |name: &str, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ScenarioError::semantic(format!("{field}.{name}"), format!("must be positive, got {value}")))
            }
        };
        let known = |watch: VehicleId| {
            if watch == v.id() || !ids.contains(&watch) {
                Err(ScenarioError::semantic(
                    format!("{field}.watch"),
                    format!("must name another declared vehicle, got {watch}"),
                ))
            } else {
                Ok(())
            }
        };
        match &v.behavior {
            Behavior::Idle => Ok(()),
            Behavior::Profile { gain, brake_on_warning, .. } => {
                positive("gain", *gain)?;
                if *brake_on_warning && self.das.is_none_or(|d| d.ego != v.id()) {
                    return Err(ScenarioError::semantic(
                        format!("{field}.brake_on_warning"),
                        "only the DAS ego vehicle can react to warnings",
                    ));
                }
                Ok(())
            }
            Behavior::Cacc { params } => {
                if let Some(p) = params {
                    p.validate().map_err(|e| ScenarioError::semantic(format!("{field}.params"), e))?;
                }
                let NetworkSpec::Precedent { order, .. } = &self.network else {
                    return Err(ScenarioError::semantic(&field, "CACC followers need a precedent network"));
                };
                match order.iter().position(|&id| id == v.id()) {
                    Some(0) | None => Err(ScenarioError::semantic(
                        &field,
                        format!("CACC vehicle {} needs a predecessor in network.order", v.id()),
                    )),
                    Some(_) => Ok(()),
                }
            }
            Behavior::StoppedLead { cruise_speed, watch, trigger_range, gain }
            | Behavior::LaneChange { cruise_speed, watch, trigger_range, gain } => {
                if !(cruise_speed.is_finite() && *cruise_speed >= 0.0) {
                    return Err(ScenarioError::semantic(format!("{field}.cruise_speed"), "must be non-negative"));
                }
                positive("trigger_range", *trigger_range)?;
                positive("gain", *gain)?;
                known(*watch)
            }
        }
    }

    fn validate_network(&self, ids: &BTreeSet<VehicleId>) -> Result<(), ScenarioError> {
        let check_delay = |delay: f64| {
            if delay.is_finite() && delay >= 0.0 {
                Ok(())
            } else {
                Err(ScenarioError::semantic("network.delay", format!("must be non-negative, got {delay}")))
            }
        };
        match &self.network {
            NetworkSpec::None => Ok(()),
            NetworkSpec::Precedent { delay, order } => {
                check_delay(*delay)?;
                if order.len() < 2 {
                    return Err(ScenarioError::semantic("network.order", "needs at least two vehicles"));
                }
                let mut seen = BTreeSet::new();
                for id in order {
                    if !ids.contains(id) {
                        return Err(ScenarioError::semantic("network.order", format!("unknown vehicle {id}")));
                    }
                    if !seen.insert(*id) {
                        return Err(ScenarioError::semantic("network.order", format!("duplicate vehicle {id}")));
                    }
                }
                Ok(())
            }
            NetworkSpec::Ego { delay, ego, range } => {
                check_delay(*delay)?;
                if !ids.contains(ego) {
                    return Err(ScenarioError::semantic("network.ego", format!("unknown vehicle {ego}")));
                }
                if !(range.is_finite() && *range >= 0.0) {
                    return Err(ScenarioError::semantic("network.range", format!("must be non-negative, got {range}")));
                }
                if let Some(das) = &self.das {
                    if das.ego != *ego {
                        return Err(ScenarioError::semantic("controller.das.ego", "must match network.ego"));
                    }
                }
                Ok(())
            }
        }
    }
}
