//! Simulated V2V message layer.
//!
//! Directed links carry [`KinematicMessage`]s with a constant per-link delay.
//! An optional range gate drops messages whose endpoints are farther apart
//! than the limit at send time. Delivery is push-based and ordered by
//! `(deliver_at, enqueue order)`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vehicle::{VehicleId, VehicleState};

/// Default communication range for ego-centric networks, meters.
pub const DEFAULT_RANGE: f64 = 300.0;

/// Slack for comparing accumulated tick times against delivery times.
pub const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("precedent topology needs at least two vehicles, got {0}")]
    TooFewVehicles(usize),
    #[error("duplicate vehicle id {0}")]
    DuplicateId(VehicleId),
    #[error("ego vehicle {0} is not among the vehicle ids")]
    MissingEgo(VehicleId),
    #[error("self-link on vehicle {0}")]
    SelfLink(VehicleId),
    #[error("no link {0} -> {1}")]
    UnknownLink(VehicleId, VehicleId),
    #[error("invalid delay {0}; must be finite and non-negative")]
    BadDelay(f64),
    #[error("invalid range limit {0}")]
    BadRange(f64),
    #[error("clock went backwards: {now} < {previous}")]
    ClockRegression { now: f64, previous: f64 },
    #[error("message from {sender} stamped {sent_at} but sent at {now}")]
    StaleTimestamp { sender: VehicleId, sent_at: f64, now: f64 },
}

/// The per-vehicle broadcast: id, position, yaw, speed and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicMessage {
    pub sender_id: VehicleId,
    pub position: (f64, f64, f64),
    pub yaw: f64,
    pub speed: f64,
    pub accel: f64,
    pub sent_at: f64,
}

impl KinematicMessage {
    pub fn from_state(state: &VehicleState, now: f64) -> Self {
        Self {
            sender_id: state.id,
            position: (state.x, state.y, 0.0),
            yaw: state.yaw,
            speed: state.v,
            accel: state.a,
            sent_at: now,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub deliver_at: f64,
    pub src: VehicleId,
    pub dst: VehicleId,
    pub message: KinematicMessage,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    deliver_at: f64,
    seq: u64,
    dst: VehicleId,
    message: KinematicMessage,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for InFlight {}

impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest delivery first.
impl Ord for InFlight {
    fn cmp(&self, other: &Self) -> Ordering {
        other.deliver_at.total_cmp(&self.deliver_at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Counters backing the conservation check `sent = delivered + in flight`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrafficCounters {
    pub enqueued: u64,
    pub delivered: u64,
    pub dropped_out_of_range: u64,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    links: BTreeSet<(VehicleId, VehicleId)>,
    delay: f64,
    delay_overrides: BTreeMap<(VehicleId, VehicleId), f64>,
    range_limit: Option<f64>,
    in_flight: BinaryHeap<InFlight>,
    next_seq: u64,
    clock: Option<f64>,
    counters: TrafficCounters,
}

impl NetworkModel {
    /// An empty network with the given uniform delay and no links.
    pub fn new(delay: f64) -> Result<Self, NetworkError> {
        check_delay(delay)?;
        Ok(Self {
            links: BTreeSet::new(),
            delay,
            delay_overrides: BTreeMap::new(),
            range_limit: None,
            in_flight: BinaryHeap::new(),
            next_seq: 0,
            clock: None,
            counters: TrafficCounters::default(),
        })
    }

    pub fn add_link(&mut self, src: VehicleId, dst: VehicleId) -> Result<(), NetworkError> {
        if src == dst {
            return Err(NetworkError::SelfLink(src));
        }
        self.links.insert((src, dst));
        Ok(())
    }

    pub fn links(&self) -> &BTreeSet<(VehicleId, VehicleId)> {
        &self.links
    }

    pub fn has_link(&self, src: VehicleId, dst: VehicleId) -> bool {
        self.links.contains(&(src, dst))
    }

    /// Senders with a link into `dst`.
    pub fn incoming(&self, dst: VehicleId) -> impl Iterator<Item = VehicleId> + '_ {
        self.links.iter().filter(move |(_, d)| *d == dst).map(|(s, _)| *s)
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn set_delay(&mut self, delay: f64) -> Result<(), NetworkError> {
        check_delay(delay)?;
        self.delay = delay;
        Ok(())
    }

    pub fn set_link_delay(&mut self, src: VehicleId, dst: VehicleId, delay: f64) -> Result<(), NetworkError> {
        check_delay(delay)?;
        if !self.has_link(src, dst) {
            return Err(NetworkError::UnknownLink(src, dst));
        }
        self.delay_overrides.insert((src, dst), delay);
        Ok(())
    }

    pub fn link_delay(&self, src: VehicleId, dst: VehicleId) -> f64 {
        self.delay_overrides.get(&(src, dst)).copied().unwrap_or(self.delay)
    }

    pub fn range_limit(&self) -> Option<f64> {
        self.range_limit
    }

    pub fn set_range_limit(&mut self, range: Option<f64>) -> Result<(), NetworkError> {
        if let Some(r) = range {
            if !(r.is_finite() && r >= 0.0) {
                return Err(NetworkError::BadRange(r));
            }
        }
        self.range_limit = range;
        Ok(())
    }

    pub fn in_flight_len(&self) -> usize {
        self.in_flight.len()
    }

    pub fn counters(&self) -> TrafficCounters {
        self.counters
    }

    /// Pushes `msg` onto every outgoing link of `src` whose endpoints are
    /// within range. Out-of-range or unknown-position destinations are
    /// dropped silently.
    pub fn send(
        &mut self,
        src: VehicleId,
        msg: KinematicMessage,
        now: f64,
        positions: &BTreeMap<VehicleId, (f64, f64)>,
    ) -> Result<(), NetworkError> {
        if (msg.sent_at - now).abs() > TIME_EPSILON {
            return Err(NetworkError::StaleTimestamp { sender: src, sent_at: msg.sent_at, now });
        }
        let dsts: Vec<VehicleId> =
            self.links.range((src, VehicleId(0))..=(src, VehicleId(u32::MAX))).map(|(_, d)| *d).collect();
        for dst in dsts {
            if let Some(limit) = self.range_limit {
                let in_range = match (positions.get(&src), positions.get(&dst)) {
                    (Some(a), Some(b)) => (a.0 - b.0).hypot(a.1 - b.1) <= limit,
                    _ => false,
                };
                if !in_range {
                    self.counters.dropped_out_of_range += 1;
                    continue;
                }
            }
            let deliver_at = msg.sent_at + self.link_delay(src, dst);
            self.in_flight.push(InFlight { deliver_at, seq: self.next_seq, dst, message: msg });
            self.next_seq += 1;
            self.counters.enqueued += 1;
        }
        Ok(())
    }

    /// Removes and returns every message with `deliver_at <= now`, earliest
    /// first, enqueue order breaking ties.
    pub fn deliver_due(&mut self, now: f64) -> Result<Vec<Delivery>, NetworkError> {
        if let Some(previous) = self.clock {
            if now < previous {
                return Err(NetworkError::ClockRegression { now, previous });
            }
        }
        self.clock = Some(now);
        let mut out = Vec::new();
        while let Some(head) = self.in_flight.peek() {
            if head.deliver_at > now + TIME_EPSILON {
                break;
            }
            let item = self.in_flight.pop().expect("peeked");
            out.push(Delivery {
                deliver_at: item.deliver_at,
                src: item.message.sender_id,
                dst: item.dst,
                message: item.message,
            });
        }
        self.counters.delivered += out.len() as u64;
        Ok(out)
    }
}

fn check_delay(delay: f64) -> Result<(), NetworkError> {
    if delay.is_finite() && delay >= 0.0 {
        Ok(())
    } else {
        Err(NetworkError::BadDelay(delay))
    }
}

/// Chain topology: each vehicle receives only from the one directly ahead.
/// `ids` are ordered front to back.
pub fn build_precedent_topology(ids: &[VehicleId], delay: f64) -> Result<NetworkModel, NetworkError> {
    if ids.len() < 2 {
        return Err(NetworkError::TooFewVehicles(ids.len()));
    }
    check_unique(ids)?;
    let mut net = NetworkModel::new(delay)?;
    for pair in ids.windows(2) {
        net.add_link(pair[0], pair[1])?;
    }
    Ok(net)
}

/// Receive-only star around `ego`: every other vehicle links to the ego, the
/// ego sends nothing.
pub fn build_ego_topology(
    ids: &[VehicleId],
    ego: VehicleId,
    range_limit: f64,
    delay: f64,
) -> Result<NetworkModel, NetworkError> {
    check_unique(ids)?;
    if !ids.contains(&ego) {
        return Err(NetworkError::MissingEgo(ego));
    }
    let mut net = NetworkModel::new(delay)?;
    net.set_range_limit(Some(range_limit))?;
    for &id in ids.iter().filter(|&&id| id != ego) {
        net.add_link(id, ego)?;
    }
    Ok(net)
}

fn check_unique(ids: &[VehicleId]) -> Result<(), NetworkError> {
    let mut seen = BTreeSet::new();
    for &id in ids {
        if !seen.insert(id) {
            return Err(NetworkError::DuplicateId(id));
        }
    }
    Ok(())
}
