//! Obstacles with simple motion models and their per-stage prediction.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use tinysdp::Disk;

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub center: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Motion {
    Static,
    Linear { velocity: Vec<f64> },
    /// Piecewise-linear path through time-sorted waypoints. With a `period`
    /// the time is wrapped into `[0, period)` first; otherwise it is clamped
    /// to the waypoint range.
    Scripted {
        waypoints: Vec<Waypoint>,
        #[serde(default)]
        period: Option<f64>,
    },
}

impl Default for Motion {
    fn default() -> Self {
        Motion::Static
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub motion: Motion,
}

impl Obstacle {
    pub fn fixed(center: &[f64], radius: f64) -> Self {
        Self { center: center.to_vec(), radius, motion: Motion::Static }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.center.len() != dim {
            return Err(BenchError::Config(format!("obstacle center has {} entries, expected {dim}", self.center.len())));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(BenchError::Config(format!("obstacle radius must be positive, got {}", self.radius)));
        }
        match &self.motion {
            Motion::Static => {}
            Motion::Linear { velocity } => {
                if velocity.len() != dim {
                    return Err(BenchError::Config("obstacle velocity has the wrong dimension".into()));
                }
            }
            Motion::Scripted { waypoints, period } => {
                if waypoints.is_empty() {
                    return Err(BenchError::Config("scripted motion needs at least one waypoint".into()));
                }
                if waypoints.iter().any(|w| w.center.len() != dim) {
                    return Err(BenchError::Config("waypoint has the wrong dimension".into()));
                }
                if waypoints.windows(2).any(|w| !(w[0].t <= w[1].t)) {
                    return Err(BenchError::Config("scripted waypoints must be time-sorted".into()));
                }
                if let Some(p) = period {
                    if !(*p > 0.0) {
                        return Err(BenchError::Config("scripted period must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Center at absolute time `t`.
    pub fn center_at(&self, t: f64) -> DVector<f64> {
        let c = DVector::from_column_slice(&self.center);
        match &self.motion {
            Motion::Static => c,
            Motion::Linear { velocity } => c + DVector::from_column_slice(velocity) * t,
            Motion::Scripted { waypoints, period } => {
                let t = match period {
                    Some(p) => t.rem_euclid(*p),
                    None => t,
                };
                scripted_center(waypoints, t)
            }
        }
    }

    pub fn disk_at(&self, t: f64) -> Disk {
        Disk { center: self.center_at(t), radius: self.radius }
    }

    /// Center velocity at `t` by central difference; exact for static and
    /// linear motion.
    pub fn velocity_at(&self, t: f64) -> DVector<f64> {
        match &self.motion {
            Motion::Static => DVector::zeros(self.center.len()),
            Motion::Linear { velocity } => DVector::from_column_slice(velocity),
            Motion::Scripted { .. } => {
                let h = 1e-4;
                (self.center_at(t + h) - self.center_at(t - h)) / (2.0 * h)
            }
        }
    }
}

fn scripted_center(waypoints: &[Waypoint], t: f64) -> DVector<f64> {
    let first = &waypoints[0];
    let last = &waypoints[waypoints.len() - 1];
    if t <= first.t {
        return DVector::from_column_slice(&first.center);
    }
    if t >= last.t {
        return DVector::from_column_slice(&last.center);
    }
    let i = waypoints.partition_point(|w| w.t <= t);
    let (a, b) = (&waypoints[i - 1], &waypoints[i]);
    let span = b.t - a.t;
    let s = if span > 0.0 { (t - a.t) / span } else { 1.0 };
    let ca = DVector::from_column_slice(&a.center);
    let cb = DVector::from_column_slice(&b.center);
    &ca + (cb - &ca) * s
}

/// Obstacle disks for stages `0..=n`, stage `k` at time `t_now + k·dt`.
pub fn predict_obstacles(obstacles: &[Obstacle], t_now: f64, n: usize, dt: f64) -> Vec<Vec<Disk>> {
    (0..=n)
        .map(|k| {
            let t = t_now + k as f64 * dt;
            obstacles.iter().map(|o| o.disk_at(t)).collect()
        })
        .collect()
}

/// Signed clearance of a point robot at `p` to the closest obstacle at `t`.
pub fn min_clearance(obstacles: &[Obstacle], p: &DVector<f64>, t: f64) -> f64 {
    obstacles
        .iter()
        .map(|o| o.disk_at(t).clearance(p))
        .fold(f64::INFINITY, f64::min)
}
