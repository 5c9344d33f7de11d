use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::vehicle::VehicleState;

/// Piecewise-linear speed schedule, held constant outside its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct SpeedProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl SpeedProfile {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, ScenarioError> {
        if breakpoints.is_empty() {
            return Err(ScenarioError::semantic("profile", "needs at least one breakpoint"));
        }
        for &(t, v) in &breakpoints {
            if !t.is_finite() || !v.is_finite() {
                return Err(ScenarioError::semantic("profile", "breakpoints must be finite"));
            }
            if v < 0.0 {
                return Err(ScenarioError::semantic("profile", format!("negative speed {v} at t={t}")));
            }
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ScenarioError::semantic("profile", "breakpoint times must be strictly increasing"));
        }
        Ok(Self { breakpoints })
    }

    pub fn constant(v: f64) -> Result<Self, ScenarioError> {
        Self::new(vec![(0.0, v)])
    }

    /// The two-vehicle delay experiment's leader schedule: 0 → 37 m/s over
    /// 10 s, down to 8 m/s at 15 s, back to 37 m/s at 25 s, then 3 m/s at 33 s.
    pub fn leader_reference() -> Self {
        Self::new(vec![(0.0, 0.0), (10.0, 37.0), (15.0, 8.0), (25.0, 37.0), (33.0, 3.0)])
            .expect("reference profile is valid")
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let bp = &self.breakpoints;
        let first = bp[0];
        let last = bp[bp.len() - 1];
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        // first index with time > t; t lies in [bp[i-1], bp[i])
        let i = bp.partition_point(|&(bt, _)| bt <= t);
        let (t0, v0) = bp[i - 1];
        let (t1, v1) = bp[i];
        if t == t0 {
            return v0;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

impl TryFrom<Vec<(f64, f64)>> for SpeedProfile {
    type Error = ScenarioError;

    fn try_from(value: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<SpeedProfile> for Vec<(f64, f64)> {
    fn from(p: SpeedProfile) -> Self {
        p.breakpoints
    }
}

/// Proportional speed tracking, `gain·(profile(t) − v)`. Unclamped.
pub fn profile_tracking_accel(profile: &SpeedProfile, state: &VehicleState, t: f64, gain: f64) -> f64 {
    gain * (profile.speed_at(t) - state.v)
}
