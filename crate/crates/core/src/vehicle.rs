//! Planar kinematic vehicle model.
//!
//! Heading convention: a vehicle with yaw `θ` moves along the unit vector
//! `(sin θ, cos θ)`, so `θ = 0` points down the +y axis. Roads in every
//! scenario run along +y and lanes are separated in x.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nominal lane width in meters. A lateral blend covers one lane width in
/// `lane_blend_duration`.
pub const LANE_WIDTH: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("non-finite input to vehicle step: {0}")]
    NonFinite(&'static str),
    #[error("time step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("invalid vehicle state: {0}")]
    InvalidState(String),
    #[error("invalid actuator limits: {0}")]
    InvalidLimits(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Longitudinal speed, never negative.
    pub v: f64,
    /// Acceleration applied during the last step.
    pub a: f64,
    pub width: f64,
    pub length: f64,
}

impl VehicleState {
    pub fn new(id: VehicleId, x: f64, y: f64, yaw: f64, v: f64, width: f64, length: f64) -> Self {
        Self { id, x, y, yaw: normalize_angle(yaw), v, a: 0.0, width, length }
    }

    pub fn heading(&self) -> (f64, f64) {
        unit_heading(self.yaw)
    }

    pub fn velocity(&self) -> (f64, f64) {
        let (hx, hy) = self.heading();
        (self.v * hx, self.v * hy)
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let fields = [self.x, self.y, self.yaw, self.v, self.a, self.width, self.length];
        if fields.iter().any(|f| !f.is_finite()) {
            return Err(VehicleError::NonFinite("state"));
        }
        if self.v < 0.0 {
            return Err(VehicleError::InvalidState(format!("vehicle {} has negative speed {}", self.id, self.v)));
        }
        if self.width <= 0.0 || self.length <= 0.0 {
            return Err(VehicleError::InvalidState(format!(
                "vehicle {} needs positive dimensions, got {}x{}",
                self.id, self.width, self.length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLimits {
    pub a_max: f64,
    /// Strongest deceleration, negative.
    pub a_min: f64,
    pub lane_blend_duration: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self { a_max: 6.0, a_min: -8.0, lane_blend_duration: 2.0 }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<(), VehicleError> {
        if !(self.a_min < 0.0 && self.a_max > 0.0) {
            return Err(VehicleError::InvalidLimits(format!(
                "need a_min < 0 < a_max, got a_min={} a_max={}",
                self.a_min, self.a_max
            )));
        }
        if !(self.lane_blend_duration > 0.0 && self.lane_blend_duration.is_finite()) {
            return Err(VehicleError::InvalidLimits(format!(
                "lane_blend_duration must be positive, got {}",
                self.lane_blend_duration
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, accel: f64) -> f64 {
        accel.clamp(self.a_min, self.a_max)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// `(sin θ, cos θ)` with the larger component nudged by one ulp when
/// needed so that `sqrt(hx² + hy²)` evaluates to exactly 1.0.
pub fn unit_heading(yaw: f64) -> (f64, f64) {
    let (mut hx, mut hy) = yaw.sin_cos();
    let norm = (hx * hx + hy * hy).sqrt();
    if norm != 1.0 {
        let big = if hx.abs() >= hy.abs() { &mut hx } else { &mut hy };
        *big = if norm > 1.0 { next_toward_zero(*big) } else { next_away_from_zero(*big) };
    }
    (hx, hy)
}

fn next_toward_zero(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

fn next_away_from_zero(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

/// Advances one vehicle by `dt` with semi-implicit Euler.
///
/// Without a lateral target the vehicle moves along its heading. With one,
/// it moves down the road (+y) while its x coordinate slides toward the
/// target at one lane width per `lane_blend_duration`; yaw follows the
/// resulting motion direction.
pub fn step(
    state: &VehicleState,
    commanded_accel: f64,
    lateral_target: Option<f64>,
    dt: f64,
    limits: &ActuatorLimits,
) -> Result<VehicleState, VehicleError> {
    if !commanded_accel.is_finite() {
        return Err(VehicleError::NonFinite("commanded_accel"));
    }
    if !dt.is_finite() {
        return Err(VehicleError::NonFinite("dt"));
    }
    if dt <= 0.0 {
        return Err(VehicleError::BadTimeStep(dt));
    }
    if lateral_target.is_some_and(|t| !t.is_finite()) {
        return Err(VehicleError::NonFinite("lateral_target"));
    }
    state.validate()?;

    let accel = limits.clamp(commanded_accel);
    let raw_v = state.v + accel * dt;
    let (v, applied) = if raw_v < 0.0 { (0.0, 0.0) } else { (raw_v, accel) };

    let mut next = *state;
    next.v = v;
    next.a = applied;

    match lateral_target {
        None => {
            let (hx, hy) = state.heading();
            next.x += v * dt * hx;
            next.y += v * dt * hy;
        }
        Some(target) => {
            let max_shift = LANE_WIDTH / limits.lane_blend_duration * dt;
            let shift = (target - state.x).clamp(-max_shift, max_shift);
            let forward = v * dt;
            next.x += shift;
            next.y += forward;
            next.yaw = if shift == 0.0 && forward == 0.0 { state.yaw } else { normalize_angle(shift.atan2(forward)) };
        }
    }
    Ok(next)
}

/// Planar Euclidean distance between two vehicle reference points.
pub fn distance_between(s1: &VehicleState, s2: &VehicleState) -> f64 {
    (s1.x - s2.x).hypot(s1.y - s2.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn car(v: f64) -> VehicleState {
        VehicleState::new(VehicleId(1), 0.0, 0.0, 0.0, v, 1.8, 4.5)
    }

    #[test]
    fn single_step_moves_along_heading() {
        let next = step(&car(10.0), 2.0, None, 0.01, &ActuatorLimits::default()).unwrap();
        assert_relative_eq!(next.v, 10.02, epsilon = 1e-12);
        assert_relative_eq!(next.y, 0.1002, epsilon = 1e-12);
        assert_eq!(next.x, 0.0);
        assert_eq!(next.a, 2.0);
    }

    #[test]
    fn speed_floor_zeroes_applied_accel() {
        let next = step(&car(0.0), -5.0, None, 0.01, &ActuatorLimits::default()).unwrap();
        assert_eq!(next.v, 0.0);
        assert_eq!(next.y, 0.0);
        assert_eq!(next.a, 0.0);
    }

    #[test]
    fn command_is_clamped_to_a_max() {
        let next = step(&car(10.0), 20.0, None, 0.1, &ActuatorLimits::default()).unwrap();
        assert_relative_eq!(next.v, 10.6, epsilon = 1e-12);
        assert_eq!(next.a, 6.0);
    }

    #[test]
    fn rejects_non_finite_and_bad_dt() {
        let lim = ActuatorLimits::default();
        assert!(step(&car(1.0), f64::NAN, None, 0.01, &lim).is_err());
        assert!(step(&car(1.0), 0.0, None, 0.0, &lim).is_err());
        assert!(step(&car(1.0), 0.0, Some(f64::INFINITY), 0.01, &lim).is_err());
        let mut bad = car(1.0);
        bad.x = f64::NAN;
        assert!(matches!(step(&bad, 0.0, None, 0.01, &lim), Err(VehicleError::NonFinite(_))));
    }

    #[test]
    fn limits_must_bracket_zero() {
        let lim = ActuatorLimits { a_max: 2.0, a_min: 1.0, lane_blend_duration: 2.0 };
        assert!(lim.validate().is_err());
        assert!(ActuatorLimits::default().validate().is_ok());
    }

    #[test]
    fn lateral_blend_takes_one_blend_duration_per_lane() {
        let lim = ActuatorLimits::default();
        let mut s = VehicleState::new(VehicleId(2), 1.75, 0.0, 0.0, 19.0, 2.5, 12.0);
        let mut ticks = 0;
        while (s.x - -1.75).abs() > 1e-9 {
            s = step(&s, 0.0, Some(-1.75), 0.01, &lim).unwrap();
            assert!(s.yaw <= 0.0, "moving toward -x must yaw negative");
            ticks += 1;
            assert!(ticks < 1000);
        }
        assert_eq!(ticks, 200);
        s = step(&s, 0.0, Some(-1.75), 0.01, &lim).unwrap();
        assert_eq!(s.yaw, 0.0);
    }

    #[test]
    fn distance_examples() {
        let a = car(0.0);
        let mut b = car(0.0);
        b.x = 3.0;
        b.y = 4.0;
        assert_eq!(distance_between(&a, &b), 5.0);
        assert_eq!(distance_between(&a, &a), 0.0);
        b.x = 300.1;
        b.y = 0.0;
        assert!(distance_between(&a, &b) > 300.0);
        assert_relative_eq!(distance_between(&a, &b), 300.1);
    }

    #[test]
    fn normalize_angle_range() {
        assert_relative_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI), PI);
        assert_relative_eq!(normalize_angle(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn unit_heading_has_exact_unit_norm() {
        for k in 0..200_000 {
            let yaw = -PI + 2.0 * PI * (k as f64 + 0.5) / 200_000.0;
            let (hx, hy) = unit_heading(yaw);
            assert_eq!((hx * hx + hy * hy).sqrt(), 1.0, "yaw={yaw}");
            let (s, c) = yaw.sin_cos();
            assert!((hx - s).abs() <= f64::EPSILON && (hy - c).abs() <= f64::EPSILON);
        }
    }

    proptest! {
        #[test]
        fn speed_never_negative(v0 in 0.0f64..40.0, cmds in proptest::collection::vec(-20.0f64..20.0, 1..200)) {
            let lim = ActuatorLimits::default();
            let mut s = car(v0);
            for c in cmds {
                s = step(&s, c, None, 0.01, &lim).unwrap();
                prop_assert!(s.v >= 0.0);
            }
        }

        #[test]
        fn coasting_is_straight_constant_speed(v in 0.1f64..40.0, yaw in -3.1f64..3.1, n in 1usize..500) {
            let lim = ActuatorLimits::default();
            let start = VehicleState::new(VehicleId(0), 0.0, 0.0, yaw, v, 1.8, 4.5);
            let mut s = start;
            for _ in 0..n {
                s = step(&s, 0.0, None, 0.01, &lim).unwrap();
            }
            let expected = n as f64 * 0.01 * v;
            let travelled = distance_between(&start, &s);
            prop_assert!(((travelled - expected) / expected).abs() < 1e-9);
            prop_assert_eq!(s.v, v);
        }

        #[test]
        fn clamping_is_idempotent(v in 0.0f64..40.0, cmd in -50.0f64..50.0) {
            let lim = ActuatorLimits::default();
            let raw = step(&car(v), cmd, None, 0.01, &lim).unwrap();
            let pre = step(&car(v), lim.clamp(cmd), None, 0.01, &lim).unwrap();
            prop_assert_eq!(raw, pre);
        }

        #[test]
        fn distance_is_a_metric(p in proptest::array::uniform6(-1e3f64..1e3)) {
            let mk = |x, y| VehicleState::new(VehicleId(0), x, y, 0.0, 0.0, 1.0, 1.0);
            let (a, b, c) = (mk(p[0], p[1]), mk(p[2], p[3]), mk(p[4], p[5]));
            prop_assert_eq!(distance_between(&a, &b), distance_between(&b, &a));
            prop_assert!(distance_between(&a, &c) <= distance_between(&a, &b) + distance_between(&b, &c) + 1e-12);
            prop_assert!(distance_between(&a, &b) >= 0.0);
        }
    }
}
