//! "Case following" collision warning.
//!
//! For a pair of vehicles A and B travelling in roughly the same direction,
//! B is projected orthogonally onto A's heading line at point P. The
//! distance from P to B is the lateral offset `d_p`, the distance from A to
//! P the longitudinal offset `d_a`. The pair is in one lane when
//! `d_p < d_ls`, and the follower gets a warning when `d_a` is shorter than
//! the stopping-distance based safety distance `d_sf`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vehicle::{normalize_angle, VehicleId, VehicleState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DasError {
    #[error("invalid DAS parameter {name}={value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("duplicate vehicle id {0} in warning evaluation")]
    DuplicateId(VehicleId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DasParams {
    /// Orientation alignment threshold, radians.
    pub beta: f64,
    /// Minimal lateral safety margin, meters.
    pub d_mls: f64,
    /// Minimal longitudinal separation, meters.
    pub d_min: f64,
    /// Driver reaction time, seconds.
    pub t_r: f64,
    /// Follower maximum deceleration magnitude.
    pub a_f: f64,
    /// Leader maximum deceleration magnitude.
    pub a_l: f64,
}

impl Default for DasParams {
    fn default() -> Self {
        Self { beta: 0.17, d_mls: 0.5, d_min: 2.0, t_r: 1.0, a_f: 6.0, a_l: 6.0 }
    }
}

impl DasParams {
    pub fn validate(&self) -> Result<(), DasError> {
        let bad = |name, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(DasError::InvalidParam { name, value })
            }
        };
        bad("beta", self.beta, self.beta > 0.0 && self.beta < PI)?;
        bad("d_mls", self.d_mls, self.d_mls >= 0.0)?;
        bad("d_min", self.d_min, self.d_min > 0.0)?;
        bad("t_r", self.t_r, self.t_r >= 0.0)?;
        bad("a_f", self.a_f, self.a_f > 0.0)?;
        bad("a_l", self.a_l, self.a_l > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Follower,
    Leader,
}

impl Role {
    pub fn opposite(self) -> Self {
        match self {
            Role::Follower => Role::Leader,
            Role::Leader => Role::Follower,
        }
    }
}

/// Orthogonal projection of B onto A's heading line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub p: (f64, f64),
    /// Signed position of P along A's heading; negative means behind A.
    pub u: f64,
    pub d_p: f64,
    pub d_a: f64,
    /// Length of the heading increment `A' - A`.
    pub denominator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub projection: Projection,
    /// `None` when A is stationary or P coincides with A.
    pub role_of_a: Option<Role>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningEvent {
    pub time: f64,
    pub follower_id: VehicleId,
    pub leader_id: VehicleId,
    pub d_a: f64,
    pub d_sf: f64,
}

/// Why a pair did or did not produce a warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairOutcome {
    NotAligned,
    DifferentLane { d_p: f64, d_ls: f64 },
    Indeterminate,
    Safe { d_a: f64, d_sf: f64 },
    Warning(WarningEvent),
}

impl PairOutcome {
    pub fn warning(&self) -> Option<WarningEvent> {
        match self {
            PairOutcome::Warning(w) => Some(*w),
            _ => None,
        }
    }
}

/// True iff the shortest-arc difference between the two headings is below
/// `beta`.
pub fn orientation_aligned(theta_a: f64, theta_b: f64, beta: f64) -> bool {
    normalize_angle(theta_a - theta_b).abs() < beta
}

pub fn project(a: &VehicleState, b: &VehicleState) -> Projection {
    // A' - A is A's heading vector
    let (hx, hy) = a.heading();
    let denominator = (hx * hx + hy * hy).sqrt();
    let u = ((b.x - a.x) * hx + (b.y - a.y) * hy) / denominator;
    let p = (a.x + u * hx, a.y + u * hy);
    let d_p = (p.0 - b.x).hypot(p.1 - b.y);
    let d_a = (p.0 - a.x).hypot(p.1 - a.y);
    Projection { p, u, d_p, d_a, denominator }
}

/// Same-lane threshold: both half-widths plus the lateral margin.
pub fn lateral_safety(params: &DasParams, width_a: f64, width_b: f64) -> f64 {
    width_a / 2.0 + width_b / 2.0 + params.d_mls
}

/// A follows if P lies ahead along its velocity (angle between AP and V_A
/// below π/2, i.e. positive dot product).
pub fn classify_role(a: &VehicleState, p: (f64, f64)) -> Option<Role> {
    let ap = (p.0 - a.x, p.1 - a.y);
    let (vx, vy) = a.velocity();
    if (ap.0 == 0.0 && ap.1 == 0.0) || a.v == 0.0 {
        return None;
    }
    let dot = ap.0 * vx + ap.1 * vy;
    if dot > 0.0 {
        Some(Role::Follower)
    } else {
        Some(Role::Leader)
    }
}

/// Stopping-distance based safety gap, floored at `d_min`.
pub fn safety_distance(params: &DasParams, v_f: f64, v_l: f64) -> f64 {
    let raw = params.d_min + v_f * params.t_r + 0.5 * (v_f * v_f / params.a_f - v_l * v_l / params.a_l);
    raw.max(params.d_min)
}

pub fn pair_geometry(a: &VehicleState, b: &VehicleState) -> PairGeometry {
    let projection = project(a, b);
    PairGeometry { projection, role_of_a: classify_role(a, projection.p) }
}

/// Runs the full gate chain for the ordered pair (A, B).
pub fn assess_pair(a: &VehicleState, b: &VehicleState, params: &DasParams, now: f64) -> PairOutcome {
    if !orientation_aligned(a.yaw, b.yaw, params.beta) {
        return PairOutcome::NotAligned;
    }
    let geom = pair_geometry(a, b);
    let d_ls = lateral_safety(params, a.width, b.width);
    let d_p = geom.projection.d_p;
    if d_p >= d_ls {
        return PairOutcome::DifferentLane { d_p, d_ls };
    }
    let Some(role) = geom.role_of_a else {
        return PairOutcome::Indeterminate;
    };
    let (follower, leader) = match role {
        Role::Follower => (a, b),
        Role::Leader => (b, a),
    };
    let d_a = geom.projection.d_a;
    let d_sf = safety_distance(params, follower.v, leader.v);
    if d_a < d_sf {
        PairOutcome::Warning(WarningEvent { time: now, follower_id: follower.id, leader_id: leader.id, d_a, d_sf })
    } else {
        PairOutcome::Safe { d_a, d_sf }
    }
}

pub fn evaluate_pair(a: &VehicleState, b: &VehicleState, params: &DasParams, now: f64) -> Option<WarningEvent> {
    assess_pair(a, b, params, now).warning()
}

/// Evaluates one unordered pair: from A's side first, and from B's side if
/// A cannot be classified (stationary, or P on top of A).
pub fn assess_unordered(a: &VehicleState, b: &VehicleState, params: &DasParams, now: f64) -> PairOutcome {
    match assess_pair(a, b, params, now) {
        PairOutcome::Indeterminate => assess_pair(b, a, params, now),
        outcome => outcome,
    }
}

/// All warnings among `vehicles`, one evaluation per unordered pair, sorted
/// by `(follower_id, leader_id)`.
pub fn evaluate_all(vehicles: &[VehicleState], params: &DasParams, now: f64) -> Result<Vec<WarningEvent>, DasError> {
    let mut seen = BTreeSet::new();
    for v in vehicles {
        if !seen.insert(v.id) {
            return Err(DasError::DuplicateId(v.id));
        }
    }
    let mut out: Vec<WarningEvent> = vehicles
        .iter()
        .enumerate()
        .flat_map(|(i, a)| vehicles[i + 1..].iter().map(move |b| (a, b)))
        .filter_map(|(a, b)| assess_unordered(a, b, params, now).warning())
        .collect();
    out.sort_by_key(|w| (w.follower_id, w.leader_id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn veh(id: u32, x: f64, y: f64, yaw: f64, v: f64) -> VehicleState {
        VehicleState::new(VehicleId(id), x, y, yaw, v, 2.0, 4.5)
    }

    /// Generic point-to-line projection used as an independent oracle:
    /// line through `o` with direction `d` (any length), point `q`.
    fn oracle_projection(o: (f64, f64), d: (f64, f64), q: (f64, f64)) -> ((f64, f64), f64, f64) {
        let len2 = d.0 * d.0 + d.1 * d.1;
        let t = ((q.0 - o.0) * d.0 + (q.1 - o.1) * d.1) / len2;
        let p = (o.0 + t * d.0, o.1 + t * d.1);
        let lateral = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        let along = ((p.0 - o.0).powi(2) + (p.1 - o.1).powi(2)).sqrt();
        (p, lateral, along)
    }

    #[test]
    fn orientation_examples() {
        assert!(orientation_aligned(1.0, 1.0, 1e-6));
        assert!(!orientation_aligned(0.0, 0.3, 0.17));
        assert!(orientation_aligned(-3.1, 3.1, 0.17));
        assert!(!orientation_aligned(0.0, PI, 0.17));
    }

    #[test]
    fn projection_examples() {
        let a = veh(0, 0.0, 0.0, 0.0, 10.0);
        let pr = project(&a, &veh(1, 0.5, 20.0, 0.0, 10.0));
        assert_eq!(pr.denominator, 1.0);
        assert_relative_eq!(pr.u, 20.0, epsilon = 1e-12);
        assert_relative_eq!(pr.p.0, 0.0, epsilon = 1e-12);
        assert_relative_eq!(pr.p.1, 20.0, epsilon = 1e-12);
        assert_relative_eq!(pr.d_p, 0.5, epsilon = 1e-12);
        assert_relative_eq!(pr.d_a, 20.0, epsilon = 1e-12);
        let (p, lat, along) = oracle_projection((0.0, 0.0), (0.0, 7.0), (0.5, 20.0));
        assert_relative_eq!(pr.p.1, p.1, epsilon = 1e-12);
        assert_relative_eq!(pr.d_p, lat, epsilon = 1e-12);
        assert_relative_eq!(pr.d_a, along, epsilon = 1e-12);

        let angled = veh(0, 1.0, 1.0, 0.6, 5.0);
        let (hx, hy) = angled.heading();
        let on_ray = veh(1, 1.0 + 13.0 * hx, 1.0 + 13.0 * hy, 0.6, 5.0);
        assert!(project(&angled, &on_ray).d_p < 1e-12);

        let same = project(&a, &a);
        assert_eq!((same.u, same.p, same.d_p, same.d_a), (0.0, (0.0, 0.0), 0.0, 0.0));
    }

    #[test]
    fn lateral_safety_examples() {
        let p = DasParams::default();
        assert_relative_eq!(lateral_safety(&p, 2.0, 2.0), 2.5);
        assert_relative_eq!(lateral_safety(&p, 2.5, 1.8), 2.65, epsilon = 1e-12);
        let tight = DasParams { d_mls: 0.0, ..p };
        assert_relative_eq!(lateral_safety(&tight, 1e-4, 1e-4), 1e-4);
    }

    #[test]
    fn role_examples() {
        let a = veh(0, 0.0, 0.0, 0.0, 10.0);
        assert_eq!(classify_role(&a, (0.0, 20.0)), Some(Role::Follower));
        assert_eq!(classify_role(&a, (0.0, -20.0)), Some(Role::Leader));
        assert_eq!(classify_role(&veh(0, 0.0, 0.0, 0.0, 0.0), (0.0, 20.0)), None);
        assert_eq!(classify_role(&a, (0.0, 0.0)), None);
    }

    #[test]
    fn safety_distance_examples() {
        let p = DasParams::default();
        assert_eq!(safety_distance(&p, 0.0, 0.0), 2.0);
        assert_relative_eq!(safety_distance(&p, 10.0, 5.0), 18.25, epsilon = 1e-12);
        assert_eq!(safety_distance(&p, 0.0, 30.0), 2.0);
    }

    #[test]
    fn params_validation() {
        assert!(DasParams::default().validate().is_ok());
        assert!(DasParams { beta: PI, ..DasParams::default() }.validate().is_err());
        assert!(DasParams { a_l: 0.0, ..DasParams::default() }.validate().is_err());
        assert!(DasParams { d_min: 0.0, ..DasParams::default() }.validate().is_err());
    }

    #[test]
    fn stopped_lead_warns() {
        let p = DasParams::default();
        let ego = veh(0, 0.0, 0.0, 0.0, 19.44);
        let lead = veh(1, 0.0, 20.0, 0.0, 0.0);
        let w = evaluate_pair(&ego, &lead, &p, 3.0).expect("warning");
        let expected = 2.0 + 19.44 + 0.5 * (19.44 * 19.44 / 6.0);
        assert_relative_eq!(w.d_sf, expected, epsilon = 1e-12);
        assert!((w.d_sf - 52.93).abs() < 0.01);
        assert_relative_eq!(w.d_a, 20.0, epsilon = 1e-12);
        assert_eq!((w.follower_id, w.leader_id, w.time), (VehicleId(0), VehicleId(1), 3.0));
        // lead's own perspective is indeterminate (stationary)
        assert_eq!(assess_pair(&lead, &ego, &p, 3.0), PairOutcome::Indeterminate);
        assert_eq!(assess_unordered(&lead, &ego, &p, 3.0).warning(), Some(w));
    }

    #[test]
    fn adjacent_lane_is_ignored() {
        let p = DasParams::default();
        let a = veh(0, 0.0, 0.0, 0.0, 20.0);
        let b = veh(1, 3.0, 10.0, 0.0, 5.0);
        match assess_pair(&a, &b, &p, 0.0) {
            PairOutcome::DifferentLane { d_p, d_ls } => {
                assert_relative_eq!(d_p, 3.0, epsilon = 1e-12);
                assert_relative_eq!(d_ls, 2.5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn opposing_headings_are_ignored() {
        let p = DasParams::default();
        let a = veh(0, 0.0, 0.0, 0.0, 20.0);
        let b = veh(1, 0.0, 10.0, PI, 20.0);
        assert_eq!(assess_pair(&a, &b, &p, 0.0), PairOutcome::NotAligned);
    }

    #[test]
    fn evaluate_all_small_cases() {
        let p = DasParams::default();
        assert!(evaluate_all(&[], &p, 0.0).unwrap().is_empty());
        assert!(evaluate_all(&[veh(0, 0.0, 0.0, 0.0, 10.0)], &p, 0.0).unwrap().is_empty());
        let dup = [veh(0, 0.0, 0.0, 0.0, 10.0), veh(0, 0.0, 5.0, 0.0, 10.0)];
        assert_eq!(evaluate_all(&dup, &p, 0.0), Err(DasError::DuplicateId(VehicleId(0))));
    }

    #[test]
    fn three_vehicle_queue() {
        // rear (id 2) at y=0, middle (id 1) at 15, front (id 0) at 30, all 15 m/s.
        // d_sf(15, 15) = 2 + 15 = 17: consecutive pairs (15 m) warn, the
        // outer pair (30 m) does not.
        let p = DasParams::default();
        let q = [veh(0, 0.0, 30.0, 0.0, 15.0), veh(1, 0.0, 15.0, 0.0, 15.0), veh(2, 0.0, 0.0, 0.0, 15.0)];
        assert_relative_eq!(safety_distance(&p, 15.0, 15.0), 17.0);
        let w = evaluate_all(&q, &p, 1.0).unwrap();
        let pairs: Vec<_> = w.iter().map(|w| (w.follower_id.0, w.leader_id.0)).collect();
        assert_eq!(pairs, vec![(1, 0), (2, 1)]);
        assert!(evaluate_pair(&q[2], &q[0], &p, 1.0).is_none());

        // at 30 m/s d_sf = 32 exceeds the 30 m outer gap as well
        let fast: Vec<_> = q.iter().map(|s| VehicleState { v: 30.0, ..*s }).collect();
        assert_eq!(evaluate_all(&fast, &p, 1.0).unwrap().len(), 3);
    }

    fn arb_vehicle(id: u32) -> impl Strategy<Value = VehicleState> {
        (-200.0f64..200.0, -200.0f64..200.0, -PI..PI, 0.0f64..40.0, 1.5f64..2.6)
            .prop_map(move |(x, y, yaw, v, w)| VehicleState::new(VehicleId(id), x, y, yaw, v, w, 4.5))
    }

    fn arb_queue() -> impl Strategy<Value = Vec<VehicleState>> {
        // headings near a shared direction and small lateral spread so all
        // gate outcomes appear
        (0usize..=6, -PI..PI).prop_flat_map(|(n, base)| {
            proptest::collection::vec((-2.0f64..2.0, -60.0f64..60.0, -0.2f64..0.2, 0.0f64..35.0), n).prop_map(
                move |rows| {
                    rows.into_iter()
                        .enumerate()
                        .map(|(i, (lat, lon, dyaw, v))| {
                            let (s, c) = base.sin_cos();
                            let x = lon * s + lat * c;
                            let y = lon * c - lat * s;
                            VehicleState::new(VehicleId(i as u32), x, y, base + dyaw, v, 1.8, 4.5)
                        })
                        .collect()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn projection_matches_oracle(a in arb_vehicle(0), b in arb_vehicle(1)) {
            let pr = project(&a, &b);
            let (p, lat, along) = oracle_projection((a.x, a.y), (3.0 * a.yaw.sin(), 3.0 * a.yaw.cos()), (b.x, b.y));
            prop_assert!((pr.p.0 - p.0).abs() < 1e-9 && (pr.p.1 - p.1).abs() < 1e-9);
            prop_assert!((pr.d_p - lat).abs() < 1e-9);
            prop_assert!((pr.d_a - along).abs() < 1e-9);
        }

        #[test]
        fn safety_distance_increases_with_follower_speed(v_f in 0.0f64..50.0, dv in 0.001f64..10.0, v_l in 0.0f64..50.0) {
            let p = DasParams::default();
            let lo = safety_distance(&p, v_f, v_l);
            let hi = safety_distance(&p, v_f + dv, v_l);
            // the floor can hold both at d_min when the leader is much faster
            prop_assert!(hi > lo || (lo == p.d_min && hi == p.d_min));
            if lo > p.d_min {
                prop_assert!(hi > lo);
            }
        }

        #[test]
        fn role_antisymmetry(base in -PI..PI, gap in 0.5f64..80.0, lat in -1.0f64..1.0, va in 0.1f64..40.0, vb in 0.1f64..40.0) {
            let p = DasParams::default();
            let (s, c) = base.sin_cos();
            let a = VehicleState::new(VehicleId(0), 0.0, 0.0, base, va, 1.8, 4.5);
            let b = VehicleState::new(VehicleId(1), gap * s + lat * c, gap * c - lat * s, base, vb, 1.8, 4.5);
            let ab = pair_geometry(&a, &b);
            let ba = pair_geometry(&b, &a);
            prop_assert_eq!(ab.role_of_a, Some(Role::Follower));
            prop_assert_eq!(ba.role_of_a, Some(Role::Leader));
            let w1 = evaluate_pair(&a, &b, &p, 0.0).map(|w| (w.follower_id, w.leader_id));
            let w2 = evaluate_pair(&b, &a, &p, 0.0).map(|w| (w.follower_id, w.leader_id));
            prop_assert_eq!(w1, w2);
        }

        #[test]
        fn evaluate_all_equals_brute_force(q in arb_queue()) {
            let p = DasParams::default();
            let got = evaluate_all(&q, &p, 2.0).unwrap();
            let mut expected = Vec::new();
            for i in 0..q.len() {
                for j in 0..q.len() {
                    if i >= j { continue; }
                    let first = assess_pair(&q[i], &q[j], &p, 2.0);
                    let outcome = if first == PairOutcome::Indeterminate { assess_pair(&q[j], &q[i], &p, 2.0) } else { first };
                    if let PairOutcome::Warning(w) = outcome { expected.push(w); }
                }
            }
            expected.sort_by_key(|w| (w.follower_id, w.leader_id));
            prop_assert_eq!(got, expected);
        }
    }
}
