use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::log::TrajectoryLog;
use crate::obstacle::min_clearance;
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub path_length: f64,
    pub final_goal_distance: f64,
    pub reached: bool,
    pub collided: bool,
    pub min_clearance: f64,
    /// Fraction of certified steps; `None` for methods without a certificate.
    pub certified_fraction: Option<f64>,
    pub fallback_steps: usize,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    pub mean_solve_time: f64,
    pub steps: usize,
    /// The solver produced non-finite values and the run stopped early.
    pub aborted: bool,
}

impl RunMetrics {
    pub fn safe(&self) -> bool {
        !self.collided && !self.aborted
    }

    /// Safe and at the goal.
    pub fn success(&self) -> bool {
        self.safe() && self.reached
    }
}

/// Metrics of a realized trajectory. Collision uses the point-robot test
/// `min_j ‖p − c_j(t)‖ − r_j < 0` at every logged state, so grazing the
/// boundary exactly is not a collision.
pub fn compute_metrics(log: &TrajectoryLog, scn: &Scenario) -> Result<RunMetrics> {
    if log.is_empty() {
        return Err(BenchError::Config("empty trajectory log".into()));
    }
    let d = scn.dim;
    let pos = |i: usize| log.rows[i].x.rows(0, d).into_owned();
    let mut path_length = 0.0;
    for i in 1..log.len() {
        path_length += (pos(i) - pos(i - 1)).norm();
    }
    let min_clear = log
        .rows
        .iter()
        .map(|r| min_clearance(&scn.obstacles, &r.x.rows(0, d).into_owned(), r.t))
        .fold(f64::INFINITY, f64::min);
    let goal = scn.goal.rows(0, d).into_owned();
    let final_goal_distance = (pos(log.len() - 1) - goal).norm();
    // the last row is the final state; every earlier row carries a control
    let controls = &log.rows[..log.len() - 1];
    let with_cert: Vec<_> = controls.iter().filter_map(|r| r.certified).collect();
    let certified_fraction = (!with_cert.is_empty())
        .then(|| with_cert.iter().filter(|c| **c).count() as f64 / with_cert.len() as f64);
    let count = controls.len().max(1) as f64;
    Ok(RunMetrics {
        path_length,
        final_goal_distance,
        reached: final_goal_distance < scn.goal_tolerance,
        collided: min_clear < 0.0,
        min_clearance: min_clear,
        certified_fraction,
        fallback_steps: controls.iter().filter(|r| r.fallback).count(),
        mean_iterations: controls.iter().map(|r| r.iterations as f64).sum::<f64>() / count,
        max_iterations: controls.iter().map(|r| r.iterations).max().unwrap_or(0),
        mean_solve_time: controls.iter().map(|r| r.solve_time).sum::<f64>() / count,
        steps: controls.len(),
        aborted: false,
    })
}
