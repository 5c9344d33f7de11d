//! Experiment drivers built on [`crate::sim::run`]: the delay sweep over a
//! two-vehicle CACC pair and the spacing analysis of a longer platoon.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{NetworkSpec, Scenario};
use crate::sim::{run, SimError, SimLog};
use crate::stats::{pearson, summarize, StatsError, SummaryStats};
use crate::vehicle::VehicleId;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("vehicle {0} not present in the log")]
    UnknownVehicle(VehicleId),
    #[error("run with delay {delay} s failed: {source}")]
    Run {
        delay: f64,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("experiment needs {0}")]
    Setup(String),
}

/// Per-tick `v_a − v_b`.
pub fn velocity_difference_series(log: &SimLog, a: VehicleId, b: VehicleId) -> Result<Vec<f64>, ExperimentError> {
    let va = column(log, a, |r| Some(r.v))?;
    let vb = column(log, b, |r| Some(r.v))?;
    Ok(va.iter().zip(&vb).map(|(x, y)| x - y).collect())
}

/// Bumper gap series of a CACC follower.
pub fn gap_series(log: &SimLog, id: VehicleId) -> Result<Vec<f64>, ExperimentError> {
    column(log, id, |r| r.gap_to_predecessor)
}

pub fn spacing_error_series(log: &SimLog, id: VehicleId) -> Result<Vec<f64>, ExperimentError> {
    column(log, id, |r| r.spacing_error)
}

fn column(
    log: &SimLog,
    id: VehicleId,
    pick: impl Fn(&crate::sim::LogRow) -> Option<f64>,
) -> Result<Vec<f64>, ExperimentError> {
    let mut found = false;
    let values = log.vehicle_rows(id).inspect(|_| found = true).filter_map(pick).collect();
    if found {
        Ok(values)
    } else {
        Err(ExperimentError::UnknownVehicle(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delay: f64,
    /// Statistics of `|v_L − v_F|`.
    pub abs_diff: SummaryStats,
    /// Statistics of the signed `v_L − v_F`.
    pub signed_diff: SummaryStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

fn leader_follower(base: &Scenario) -> Result<(VehicleId, VehicleId), ExperimentError> {
    match &base.network {
        NetworkSpec::Precedent { order, .. } if order.len() == 2 => Ok((order[0], order[1])),
        _ => Err(ExperimentError::Setup("a two-vehicle precedent network".into())),
    }
}

/// Runs `base` once per delay and summarises the leader/follower speed
/// difference of each run. Rows come back in the order of `delays`.
pub fn sweep_delay(base: &Scenario, delays: &[f64], execution: Execution) -> Result<Vec<SweepRow>, ExperimentError> {
    let (leader, follower) = leader_follower(base)?;
    let one = |&delay: &f64| -> Result<SweepRow, ExperimentError> {
        let mut scenario = base.clone();
        scenario.network.set_delay(delay);
        let log = run(&scenario).map_err(|source| ExperimentError::Run { delay, source })?;
        let diff = velocity_difference_series(&log, leader, follower)?;
        let abs: Vec<f64> = diff.iter().map(|d| d.abs()).collect();
        Ok(SweepRow { delay, abs_diff: summarize(&abs)?, signed_diff: summarize(&diff)? })
    };
    match execution {
        Execution::Sequential => delays.iter().map(one).collect(),
        Execution::Parallel => delays.par_iter().map(one).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlatoonReport {
    pub delay: f64,
    /// Followers front to back.
    pub followers: Vec<VehicleId>,
    /// Pearson correlation of each pair of gap series, `(i, j, r)` with
    /// indices into `followers`.
    pub gap_correlations: Vec<(usize, usize, f64)>,
    /// `sqrt(Σ(n_i − 1)s_i² / Σ(n_i − 1))` over the followers' spacing errors.
    pub pooled_spacing_std: f64,
    pub min_gap: f64,
}

/// Spacing analysis of a precedent-chain platoon run.
pub fn platoon_report(scenario: &Scenario, log: &SimLog) -> Result<PlatoonReport, ExperimentError> {
    let NetworkSpec::Precedent { order, delay } = &scenario.network else {
        return Err(ExperimentError::Setup("a precedent network".into()));
    };
    let followers: Vec<VehicleId> = order[1..].to_vec();
    let gaps: Vec<Vec<f64>> = followers.iter().map(|&id| gap_series(log, id)).collect::<Result<_, _>>()?;
    let mut gap_correlations = Vec::new();
    for i in 0..gaps.len() {
        for j in i + 1..gaps.len() {
            gap_correlations.push((i, j, pearson(&gaps[i], &gaps[j])?));
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &id in &followers {
        let e = spacing_error_series(log, id)?;
        let s = summarize(&e)?;
        num += (s.n - 1) as f64 * s.variance;
        den += (s.n - 1) as f64;
    }
    let pooled_spacing_std = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    let min_gap = gaps.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(PlatoonReport { delay: *delay, followers, gap_correlations, pooled_spacing_std, min_gap })
}

/// The platoon fixture with the given link delay.
pub fn platoon_scenario(delay: f64) -> Result<Scenario, ExperimentError> {
    let mut s = Scenario::builtin("platoon4").map_err(SimError::from)?;
    s.network.set_delay(delay);
    s.validate().map_err(SimError::from)?;
    Ok(s)
}
