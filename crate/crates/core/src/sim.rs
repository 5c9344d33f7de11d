//! The fixed-order simulation loop.
//!
//! Every tick runs, in order: message emission, delivery of due messages,
//! latch update, command computation (CACC, DAS, scripted behaviors),
//! integration, and logging. Nothing in the loop is random, so a scenario
//! always produces the same log.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cacc::{control_accel, CaccParams, GapMeasurement};
use crate::das::{evaluate_all, DasError, DasParams, WarningEvent};
use crate::network::{build_ego_topology, build_precedent_topology, KinematicMessage, NetworkError, NetworkModel};
use crate::scenario::behavior::lane_centerline;
use crate::scenario::{
    profile_tracking_accel, Behavior, LaneChange, NetworkSpec, Scenario, ScenarioError, ScriptedEgo, SpeedProfile,
    StoppedLead,
};
use crate::vehicle::{step, ActuatorLimits, VehicleError, VehicleId, VehicleState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("network error at tick {tick}: {source}")]
    Network {
        tick: usize,
        #[source]
        source: NetworkError,
    },
    #[error("warning evaluation failed at tick {tick}: {source}")]
    Das {
        tick: usize,
        #[source]
        source: DasError,
    },
    #[error("non-finite value at tick {tick} on vehicle {vehicle}: {detail}")]
    NonFinite { tick: usize, vehicle: VehicleId, detail: String },
}

/// One vehicle at one tick. The pose is the state at `t`; the commands are
/// those applied over `[t, t + dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub id: VehicleId,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub a_command: f64,
    pub a_applied: f64,
    /// Bumper gap to the CACC predecessor (CACC followers only).
    pub gap_to_predecessor: Option<f64>,
    pub spacing_error: Option<f64>,
    pub warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRecord {
    pub deliver_at: f64,
    pub src: VehicleId,
    pub dst: VehicleId,
    pub speed: f64,
    pub accel: f64,
}

/// Trigger times of scripted behaviors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerRecord {
    pub time: f64,
    pub vehicle: VehicleId,
    pub kind: TriggerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerKind {
    EmergencyBrake,
    LaneChange,
    DriverReaction,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub scenario: String,
    pub dt: f64,
    pub rows: Vec<LogRow>,
    pub warnings: Vec<WarningEvent>,
    pub deliveries: Vec<DeliveryRecord>,
    pub triggers: Vec<TriggerRecord>,
}

impl SimLog {
    pub fn ids(&self) -> Vec<VehicleId> {
        let mut ids: Vec<VehicleId> = self.rows.iter().map(|r| r.id).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Rows of one vehicle in tick order.
    pub fn vehicle_rows(&self, id: VehicleId) -> impl Iterator<Item = &LogRow> + '_ {
        self.rows.iter().filter(move |r| r.id == id)
    }

    pub fn first_trigger(&self, kind: TriggerKind) -> Option<&TriggerRecord> {
        self.triggers.iter().find(|t| t.kind == kind)
    }
}

enum Controller {
    Idle,
    Profile { profile: SpeedProfile, gain: f64 },
    Ego(ScriptedEgo),
    Cacc { params: CaccParams, predecessor: VehicleId },
    StoppedLead { state: StoppedLead, cruise: f64, watch: VehicleId, range: f64, gain: f64 },
    LaneChange { state: LaneChange, cruise: f64, watch: VehicleId, range: f64, gain: f64 },
}

struct Agent {
    state: VehicleState,
    limits: ActuatorLimits,
    controller: Controller,
}

fn build_network(spec: &NetworkSpec, ids: &[VehicleId]) -> Result<NetworkModel, NetworkError> {
    match spec {
        NetworkSpec::None => NetworkModel::new(0.0),
        NetworkSpec::Precedent { delay, order } => build_precedent_topology(order, *delay),
        NetworkSpec::Ego { delay, ego, range } => build_ego_topology(ids, *ego, *range, *delay),
    }
}

fn build_agents(scenario: &Scenario, net: &NetworkModel) -> Result<BTreeMap<VehicleId, Agent>, ScenarioError> {
    let das = scenario.das.map(|d| (d.ego, d.params()));
    let mut agents = BTreeMap::new();
    for spec in &scenario.vehicles {
        let controller = match &spec.behavior {
            Behavior::Idle => Controller::Idle,
            Behavior::Profile { profile, gain, brake_on_warning } => match das {
                Some((ego, params)) if ego == spec.id() => {
                    Controller::Ego(ScriptedEgo::new(profile.clone(), *gain, *brake_on_warning, params.t_r))
                }
                _ => Controller::Profile { profile: profile.clone(), gain: *gain },
            },
            Behavior::Cacc { params } => {
                let senders: Vec<VehicleId> = net.incoming(spec.id()).collect();
                let [predecessor] = senders[..] else {
                    return Err(ScenarioError::semantic(
                        format!("vehicle.{}.behavior", spec.id()),
                        format!("CACC vehicle needs exactly one incoming link, found {}", senders.len()),
                    ));
                };
                Controller::Cacc { params: params.unwrap_or(scenario.cacc), predecessor }
            }
            Behavior::StoppedLead { cruise_speed, watch, trigger_range, gain } => Controller::StoppedLead {
                state: StoppedLead::default(),
                cruise: *cruise_speed,
                watch: *watch,
                range: *trigger_range,
                gain: *gain,
            },
            Behavior::LaneChange { cruise_speed, watch, trigger_range, gain } => Controller::LaneChange {
                state: LaneChange::default(),
                cruise: *cruise_speed,
                watch: *watch,
                range: *trigger_range,
                gain: *gain,
            },
        };
        agents.insert(spec.id(), Agent { state: spec.initial, limits: spec.limits, controller });
    }
    Ok(agents)
}

/// Bumper gap between a follower and the predecessor position it knows of.
fn bumper_gap(self_state: &VehicleState, pred_pos: (f64, f64), pred_length: f64) -> f64 {
    (pred_pos.0 - self_state.x).hypot(pred_pos.1 - self_state.y) - (pred_length + self_state.length) / 2.0
}

fn state_from_message(msg: &KinematicMessage, template: &VehicleState) -> VehicleState {
    VehicleState {
        id: msg.sender_id,
        x: msg.position.0,
        y: msg.position.1,
        yaw: msg.yaw,
        v: msg.speed,
        a: msg.accel,
        width: template.width,
        length: template.length,
    }
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<SimLog, SimError> {
    scenario.validate()?;
    let ids = scenario.ids();
    let mut net = build_network(&scenario.network, &ids).map_err(|source| SimError::Network { tick: 0, source })?;
    let mut agents = build_agents(scenario, &net)?;
    let das: Option<(VehicleId, DasParams)> = scenario.das.map(|d| (d.ego, d.params()));
    let dims: BTreeMap<VehicleId, VehicleState> = scenario.vehicles.iter().map(|v| (v.id(), v.initial)).collect();

    // latest message per (receiver, sender)
    let mut latches: BTreeMap<VehicleId, BTreeMap<VehicleId, KinematicMessage>> = BTreeMap::new();

    let ticks = scenario.tick_count();
    let dt = scenario.dt;
    let mut log = SimLog { scenario: scenario.name.clone(), dt, ..SimLog::default() };
    log.rows.reserve((ticks + 1) * agents.len());

    for tick in 0..=ticks {
        let t = tick as f64 * dt;

        // 1. emission
        let positions: BTreeMap<VehicleId, (f64, f64)> =
            agents.iter().map(|(id, a)| (*id, (a.state.x, a.state.y))).collect();
        for (id, agent) in &agents {
            let msg = KinematicMessage::from_state(&agent.state, t);
            net.send(*id, msg, t, &positions).map_err(|source| SimError::Network { tick, source })?;
        }

        // 2. delivery, 3. latch update
        for d in net.deliver_due(t).map_err(|source| SimError::Network { tick, source })? {
            log.deliveries.push(DeliveryRecord {
                deliver_at: d.deliver_at,
                src: d.src,
                dst: d.dst,
                speed: d.message.speed,
                accel: d.message.accel,
            });
            latches.entry(d.dst).or_default().insert(d.src, d.message);
        }

        // 4a. warnings on the ego's view: own state plus received messages
        let warnings = match das {
            Some((ego, params)) => {
                let mut view = vec![agents[&ego].state];
                if let Some(inbox) = latches.get(&ego) {
                    view.extend(inbox.values().map(|m| state_from_message(m, &dims[&m.sender_id])));
                }
                evaluate_all(&view, &params, t).map_err(|source| SimError::Das { tick, source })?
            }
            None => Vec::new(),
        };
        if let Some((ego, _)) = das {
            if let Some(Agent { controller: Controller::Ego(driver), .. }) = agents.get_mut(&ego) {
                if driver.warned_at().is_none() && warnings.iter().any(|w| w.follower_id == ego) {
                    driver.notify_warning(t);
                    if driver.brake_on_warning {
                        log.triggers.push(TriggerRecord {
                            time: t + driver.reaction_time,
                            vehicle: ego,
                            kind: TriggerKind::DriverReaction,
                        });
                    }
                }
            }
        }

        // 4b. commands, from the states at t
        let truth: BTreeMap<VehicleId, VehicleState> = agents.iter().map(|(id, a)| (*id, a.state)).collect();
        let mut commands: BTreeMap<VehicleId, (f64, Option<f64>)> = BTreeMap::new();
        let mut gaps: BTreeMap<VehicleId, (f64, f64)> = BTreeMap::new();
        for (id, agent) in agents.iter_mut() {
            let s = agent.state;
            let cmd = match &mut agent.controller {
                Controller::Idle => (0.0, None),
                Controller::Profile { profile, gain } => (profile_tracking_accel(profile, &s, t, *gain), None),
                Controller::Ego(driver) => (driver.command(&s, t, &agent.limits), None),
                Controller::Cacc { params, predecessor } => {
                    let pred_truth = &truth[predecessor];
                    let gap = bumper_gap(&s, (pred_truth.x, pred_truth.y), pred_truth.length);
                    let e = gap - (params.headway * s.v + params.standstill);
                    gaps.insert(*id, (gap, e));
                    let latched = latches.get(id).and_then(|inbox| inbox.get(predecessor));
                    let a = match latched {
                        Some(m) => {
                            let g = GapMeasurement {
                                delta_x: bumper_gap(&s, (m.position.0, m.position.1), pred_truth.length),
                                delta_v: m.speed - s.v,
                                predecessor_accel: m.accel,
                                self_v: s.v,
                                self_a: s.a,
                            };
                            control_accel(params, &g)
                        }
                        None => 0.0,
                    };
                    (a, None)
                }
                Controller::StoppedLead { state, cruise, watch, range, gain } => {
                    let was = state.triggered_at();
                    let brake = state.update(&s, &truth[watch], *range, &agent.limits, t);
                    if was.is_none() && state.triggered_at().is_some() {
                        log.triggers.push(TriggerRecord { time: t, vehicle: *id, kind: TriggerKind::EmergencyBrake });
                    }
                    (brake.unwrap_or(*gain * (*cruise - s.v)), None)
                }
                Controller::LaneChange { state, cruise, watch, range, gain } => {
                    let ego = &truth[watch];
                    let was = state.triggered_at();
                    let target = state.update(&s, ego, lane_centerline(ego.x), *range, t);
                    if was.is_none() && state.triggered_at().is_some() {
                        log.triggers.push(TriggerRecord { time: t, vehicle: *id, kind: TriggerKind::LaneChange });
                    }
                    (*gain * (*cruise - s.v), target)
                }
            };
            commands.insert(*id, cmd);
        }

        // 5. integration, 6. logging
        for (id, agent) in agents.iter_mut() {
            let (a_cmd, lateral) = commands[id];
            if !a_cmd.is_finite() {
                return Err(SimError::NonFinite { tick, vehicle: *id, detail: format!("command {a_cmd}") });
            }
            let before = agent.state;
            let next = step(&before, a_cmd, lateral, dt, &agent.limits).map_err(|e| match e {
                VehicleError::NonFinite(what) => SimError::NonFinite { tick, vehicle: *id, detail: what.to_string() },
                other => SimError::NonFinite { tick, vehicle: *id, detail: other.to_string() },
            })?;
            if next.validate().is_err() {
                return Err(SimError::NonFinite { tick, vehicle: *id, detail: "state after step".into() });
            }
            let gap = gaps.get(id);
            log.rows.push(LogRow {
                t,
                id: *id,
                x: before.x,
                y: before.y,
                yaw: before.yaw,
                v: before.v,
                a_command: a_cmd,
                a_applied: next.a,
                gap_to_predecessor: gap.map(|g| g.0),
                spacing_error: gap.map(|g| g.1),
                warning: warnings.iter().any(|w| w.follower_id == *id || w.leader_id == *id),
            });
            agent.state = next;
        }
        log.warnings.extend(warnings);
    }
    Ok(log)
}
