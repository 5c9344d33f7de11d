//! Scripted traffic participants for the collision scenarios.

use crate::das::project;
use crate::vehicle::{ActuatorLimits, VehicleState, LANE_WIDTH};

use super::profile::{profile_tracking_accel, SpeedProfile};

/// Default rear detection range of the stopping lead vehicle, meters.
pub const STOPPED_LEAD_RANGE: f64 = 30.0;
/// Default rear detection range of the lane-changing truck, meters.
pub const LANE_CHANGE_RANGE: f64 = 15.0;

/// Distance by which `other` trails `subject` along `subject`'s heading,
/// or `None` when `other` is not behind it.
pub fn distance_behind(subject: &VehicleState, other: &VehicleState) -> Option<f64> {
    let pr = project(subject, other);
    (pr.u < 0.0).then_some(-pr.u)
}

/// Centerline of the lane containing lateral coordinate `x`, for lanes of
/// width [`LANE_WIDTH`] with a boundary at `x = 0`.
pub fn lane_centerline(x: f64) -> f64 {
    ((x / LANE_WIDTH).floor() + 0.5) * LANE_WIDTH
}

/// Lead vehicle that slams on the brakes once the watched vehicle closes in
/// from behind, and keeps braking from then on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoppedLead {
    triggered_at: Option<f64>,
}

impl StoppedLead {
    pub fn triggered_at(&self) -> Option<f64> {
        self.triggered_at
    }

    /// Returns the brake command once triggered, `None` otherwise.
    pub fn update(
        &mut self,
        lead: &VehicleState,
        ego: &VehicleState,
        range: f64,
        limits: &ActuatorLimits,
        now: f64,
    ) -> Option<f64> {
        if self.triggered_at.is_none() && distance_behind(lead, ego).is_some_and(|d| d <= range) {
            self.triggered_at = Some(now);
        }
        self.triggered_at.map(|_| limits.a_min)
    }
}

/// Vehicle that cuts into the watched vehicle's lane once it approaches
/// from behind in another lane.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaneChange {
    target: Option<f64>,
    triggered_at: Option<f64>,
}

impl LaneChange {
    pub fn triggered_at(&self) -> Option<f64> {
        self.triggered_at
    }

    pub fn target(&self) -> Option<f64> {
        self.target
    }

    /// Returns the latched lateral target (the ego's lane centerline).
    pub fn update(
        &mut self,
        truck: &VehicleState,
        ego: &VehicleState,
        ego_lane_offset: f64,
        range: f64,
        now: f64,
    ) -> Option<f64> {
        if self.target.is_none() {
            let other_lane = lane_centerline(truck.x) != ego_lane_offset;
            if other_lane && distance_behind(truck, ego).is_some_and(|d| d <= range) {
                self.target = Some(ego_lane_offset);
                self.triggered_at = Some(now);
            }
        }
        self.target
    }
}

/// Stand-in for a human driver: follows a speed profile and, when enabled,
/// brakes fully one reaction time after its first collision warning.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedEgo {
    pub profile: SpeedProfile,
    pub gain: f64,
    pub brake_on_warning: bool,
    pub reaction_time: f64,
    warned_at: Option<f64>,
}

impl ScriptedEgo {
    pub fn new(profile: SpeedProfile, gain: f64, brake_on_warning: bool, reaction_time: f64) -> Self {
        Self { profile, gain, brake_on_warning, reaction_time, warned_at: None }
    }

    pub fn warned_at(&self) -> Option<f64> {
        self.warned_at
    }

    pub fn notify_warning(&mut self, now: f64) {
        if self.warned_at.is_none() {
            self.warned_at = Some(now);
        }
    }

    pub fn command(&self, state: &VehicleState, t: f64, limits: &ActuatorLimits) -> f64 {
        match self.warned_at {
            Some(w) if self.brake_on_warning && t >= w + self.reaction_time => limits.a_min,
            _ => profile_tracking_accel(&self.profile, state, t, self.gain),
        }
    }
}

/// Profile-following command with the scripted driver's contract.
pub fn scripted_ego_driver(profile: &SpeedProfile, state: &VehicleState, t: f64, gain: f64) -> f64 {
    profile_tracking_accel(profile, state, t, gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{step, VehicleId};

    const KMH_70: f64 = 70.0 / 3.6;

    fn at(id: u32, x: f64, y: f64, v: f64) -> VehicleState {
        VehicleState::new(VehicleId(id), x, y, 0.0, v, 1.8, 4.5)
    }

    #[test]
    fn stopped_lead_trigger_threshold() {
        let lim = ActuatorLimits::default();
        let lead = at(1, 1.75, 100.0, KMH_70);
        let mut b = StoppedLead::default();
        assert_eq!(b.update(&lead, &at(0, 1.75, 69.0, KMH_70), 30.0, &lim, 0.0), None);
        assert_eq!(b.update(&lead, &at(0, 1.75, 71.0, KMH_70), 30.0, &lim, 0.1), Some(-8.0));
        assert_eq!(b.triggered_at(), Some(0.1));
        // latched even after the ego drops back
        assert_eq!(b.update(&lead, &at(0, 1.75, 50.0, KMH_70), 30.0, &lim, 0.2), Some(-8.0));
        assert_eq!(b.triggered_at(), Some(0.1));
    }

    #[test]
    fn stopped_lead_ignores_vehicles_ahead() {
        let lim = ActuatorLimits::default();
        let lead = at(1, 1.75, 100.0, KMH_70);
        let mut b = StoppedLead::default();
        assert_eq!(b.update(&lead, &at(0, 1.75, 110.0, KMH_70), 30.0, &lim, 0.0), None);
    }

    #[test]
    fn stopped_lead_brakes_to_a_halt() {
        let lim = ActuatorLimits::default();
        let mut lead = at(1, 1.75, 100.0, KMH_70);
        let ego = at(0, 1.75, 75.0, KMH_70);
        let mut b = StoppedLead::default();
        for k in 0..400 {
            let a = b.update(&lead, &ego, 30.0, &lim, k as f64 * 0.01).unwrap();
            lead = step(&lead, a, None, 0.01, &lim).unwrap();
        }
        assert_eq!(lead.v, 0.0);
    }

    #[test]
    fn lane_change_trigger_threshold() {
        let truck = VehicleState::new(VehicleId(1), 1.75, 100.0, 0.0, KMH_70, 2.5, 12.0);
        let ego_lane = lane_centerline(-1.75);
        assert_eq!(ego_lane, -1.75);

        let mut b = LaneChange::default();
        assert_eq!(b.update(&truck, &at(0, -1.75, 84.0, 25.0), ego_lane, 15.0, 0.0), None);
        assert_eq!(b.update(&truck, &at(0, -1.75, 86.0, 25.0), ego_lane, 15.0, 0.5), Some(-1.75));
        assert_eq!(b.triggered_at(), Some(0.5));
        assert_eq!(b.update(&truck, &at(0, -1.75, 40.0, 25.0), ego_lane, 15.0, 0.6), Some(-1.75));
    }

    #[test]
    fn lane_change_needs_ego_behind() {
        let truck = VehicleState::new(VehicleId(1), 1.75, 100.0, 0.0, KMH_70, 2.5, 12.0);
        let mut b = LaneChange::default();
        // alongside: projection lands on the truck's own position
        assert_eq!(b.update(&truck, &at(0, -1.75, 100.0, 25.0), -1.75, 15.0, 0.0), None);
        // already ahead
        assert_eq!(b.update(&truck, &at(0, -1.75, 105.0, 25.0), -1.75, 15.0, 0.0), None);
        // same lane: nothing to cut into
        assert_eq!(b.update(&truck, &at(0, 1.75, 90.0, 25.0), 1.75, 15.0, 0.0), None);
    }

    #[test]
    fn lane_centerlines() {
        assert_eq!(lane_centerline(1.0), 1.75);
        assert_eq!(lane_centerline(-0.2), -1.75);
        assert_eq!(lane_centerline(5.0), 5.25);
    }

    #[test]
    fn scripted_ego_cruises_and_reacts() {
        let lim = ActuatorLimits::default();
        let profile = SpeedProfile::constant(KMH_70).unwrap();
        let mut ego = ScriptedEgo::new(profile.clone(), 1.0, true, 1.0);
        let mut s = at(0, 0.0, 0.0, 0.0);
        for k in 0..3000 {
            s = step(&s, ego.command(&s, k as f64 * 0.01, &lim), None, 0.01, &lim).unwrap();
        }
        assert!((s.v - KMH_70).abs() < 1e-6);
        assert!(scripted_ego_driver(&profile, &s, 30.0, 1.0).abs() < 1e-6);

        ego.notify_warning(30.0);
        ego.notify_warning(30.5);
        assert_eq!(ego.warned_at(), Some(30.0));
        assert!(ego.command(&s, 30.9, &lim).abs() < 1e-6);
        assert_eq!(ego.command(&s, 31.0, &lim), lim.a_min);

        let passive = ScriptedEgo { brake_on_warning: false, ..ego.clone() };
        assert!(passive.command(&s, 31.0, &lim).abs() < 1e-6);
    }
}
