//! Longitudinal CACC law: constant-headway gap policy with a PD correction
//! solved for the follower's own acceleration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaccError {
    #[error("invalid CACC parameter {name}={value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaccParams {
    /// Headway time, seconds.
    pub headway: f64,
    /// Desired bumper gap at standstill, meters.
    pub standstill: f64,
    pub kp: f64,
    pub kd: f64,
}

impl Default for CaccParams {
    fn default() -> Self {
        Self { headway: 0.5, standstill: 2.0, kp: 0.2, kd: 0.7 }
    }
}

impl CaccParams {
    pub fn validate(&self) -> Result<(), CaccError> {
        let checks = [("headway", self.headway), ("standstill", self.standstill), ("kp", self.kp), ("kd", self.kd)];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(CaccError::InvalidParam { name, value });
            }
        }
        Ok(())
    }

    fn denominator(&self) -> f64 {
        1.0 + self.kd * self.headway
    }
}

/// What a follower knows about itself and its predecessor at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMeasurement {
    /// Bumper-to-bumper gap to the predecessor.
    pub delta_x: f64,
    /// Predecessor speed minus own speed.
    pub delta_v: f64,
    pub predecessor_accel: f64,
    pub self_v: f64,
    pub self_a: f64,
}

/// Desired gap `h·v + d`.
pub fn safe_gap(p: &CaccParams, v: f64) -> Result<f64, CaccError> {
    if v < 0.0 {
        return Err(CaccError::NegativeSpeed(v));
    }
    Ok(p.headway * v + p.standstill)
}

/// Spacing error and its time derivative.
pub fn spacing_error(p: &CaccParams, g: &GapMeasurement) -> (f64, f64) {
    let e = g.delta_x - (p.headway * g.self_v + p.standstill);
    let e_dot = g.delta_v - p.headway * g.self_a;
    (e, e_dot)
}

/// Acceleration command: the PD law solved for the follower's own
/// acceleration so it does not depend on its previous value.
/// Unclamped; the vehicle model applies actuator limits.
pub fn control_accel(p: &CaccParams, g: &GapMeasurement) -> f64 {
    let e = g.delta_x - p.headway * g.self_v - p.standstill;
    (g.predecessor_accel + p.kp * e + p.kd * g.delta_v) / p.denominator()
}

/// Residual of the implicit PD form at `a_candidate`. Zero iff the
/// candidate satisfies `a - a_prev = Kp·e + Kd·(Δv - h·a)`.
pub fn pd_residual(p: &CaccParams, g: &GapMeasurement, a_candidate: f64) -> f64 {
    let e = g.delta_x - p.headway * g.self_v - p.standstill;
    (a_candidate - g.predecessor_accel) - (p.kp * e + p.kd * (g.delta_v - p.headway * a_candidate))
}
