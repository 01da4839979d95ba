//! Receding-horizon simulation: predict obstacles, solve, certify, apply the
//! first input, integrate one step.

use std::time::Instant;

use nalgebra::DVector;
use tinysdp::certificate::{brake_input, safe_step, DEFAULT_TOL};
use tinysdp::{CertificateReport, Disk, LinearSystem, RiccatiCache, Solver};

use crate::baselines::{HocbfController, LinController, LinParams};
use crate::error::{BenchError, Result};
use crate::log::{StepRecord, TrajectoryLog};
use crate::metrics::{compute_metrics, RunMetrics};
use crate::obstacle::{predict_obstacles, Obstacle};
use crate::scenario::{Method, Scenario};

#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Prebuilt lifted cache; built on the fly when absent.
    pub cache: Option<RiccatiCache>,
    pub tol_cert: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { cache: None, tol_cert: DEFAULT_TOL }
    }
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub u: DVector<f64>,
    pub report: Option<CertificateReport>,
    pub fallback: bool,
    pub iterations: usize,
}

pub struct TinySdpController {
    pub solver: Solver,
    obstacles: Vec<Obstacle>,
    tol: f64,
    dt: f64,
}

impl TinySdpController {
    pub fn new(scn: &Scenario, opts: &SimOptions) -> Result<Self> {
        let lifted = scn.lifted()?;
        let weights = scn.tracking_weights();
        let cfg = scn.solver_config();
        let solver = match &opts.cache {
            Some(c) => Solver::with_cache(lifted, weights, cfg, scn.goal.clone(), c.clone())?,
            None => Solver::new(lifted, weights, cfg, scn.goal.clone())?,
        };
        Ok(Self { solver, obstacles: scn.obstacles.clone(), tol: opts.tol_cert, dt: scn.dt })
    }

    pub fn step(&mut self, t: f64, x: &DVector<f64>, predicted: &[Vec<Disk>]) -> Result<StepOutput> {
        let sol = self.solver.solve(x, predicted)?;
        // certify against every obstacle, not only the sensed ones
        let next: Vec<Disk> = self.obstacles.iter().map(|o| o.disk_at(t + self.dt)).collect();
        let w = &self.solver.weights;
        let brake = brake_input(x, self.dt, &w.u_lo, &w.u_hi);
        let (u, report) = safe_step(&sol, &next, &brake, self.tol);
        self.solver.warm_start_shift();
        Ok(StepOutput { u, fallback: !report.certified, report: Some(report), iterations: sol.iterations })
    }
}

pub enum Controller {
    Tinysdp(Box<TinySdpController>),
    Lin(Box<LinController>),
    Hocbf(HocbfController),
}

impl Controller {
    pub fn build(scn: &Scenario, opts: &SimOptions) -> Result<Self> {
        let sys = scn.system()?;
        let weights = scn.tracking_weights();
        let cfg = scn.solver_config();
        Ok(match &scn.method {
            Method::Tinysdp => Controller::Tinysdp(Box::new(TinySdpController::new(scn, opts)?)),
            Method::Lin { margin } => {
                let params = LinParams {
                    margin: *margin,
                    rho_obs: cfg.rho_obs,
                    rho_box: cfg.rho_box,
                    max_iter: cfg.max_iter,
                    eps: cfg.eps_primal,
                    horizon: scn.horizon,
                };
                Controller::Lin(Box::new(LinController::new(sys, &weights, scn.goal.clone(), params)?))
            }
            Method::Hocbf { margin, alpha1, alpha2 } => Controller::Hocbf(HocbfController::new(
                &sys,
                &weights,
                scn.goal.clone(),
                *margin,
                *alpha1,
                *alpha2,
            )?),
        })
    }

    pub fn step(&mut self, t: f64, x: &DVector<f64>, predicted: &[Vec<Disk>]) -> Result<StepOutput> {
        match self {
            Controller::Tinysdp(c) => c.step(t, x, predicted),
            Controller::Lin(c) => {
                let (u, iterations) = c.solve(x, predicted);
                Ok(StepOutput { u, report: None, fallback: false, iterations })
            }
            Controller::Hocbf(c) => {
                let u = c.filter(x, &predicted[0], &predicted[1]);
                Ok(StepOutput { u, report: None, fallback: false, iterations: 0 })
            }
        }
    }
}

/// Obstacles within the sensing range of `p` at time `t`.
fn sensed(scn: &Scenario, p: &DVector<f64>, t: f64) -> Vec<Obstacle> {
    match scn.sensing_range {
        Some(range) => scn.obstacles.iter().filter(|o| o.disk_at(t).clearance(p) <= range).cloned().collect(),
        None => scn.obstacles.clone(),
    }
}

pub fn simulate_closed_loop(scn: &Scenario) -> Result<(TrajectoryLog, RunMetrics)> {
    simulate_with(scn, &SimOptions::default())
}

pub fn simulate_with(scn: &Scenario, opts: &SimOptions) -> Result<(TrajectoryLog, RunMetrics)> {
    scn.validate()?;
    let sys: LinearSystem = scn.system()?;
    let mut ctrl = Controller::build(scn, opts)?;
    let weights = scn.tracking_weights();
    let goal = scn.position(&scn.goal);
    let mut x = scn.start.clone();
    let mut log = TrajectoryLog::default();
    let mut aborted = false;
    let mut t = 0.0;
    for step in 0..scn.steps {
        let p = scn.position(&x);
        if (&p - &goal).norm() < scn.goal_tolerance {
            break;
        }
        let predicted = predict_obstacles(&sensed(scn, &p, t), t, scn.horizon, scn.dt);
        let timer = Instant::now();
        let out = match ctrl.step(t, &x, &predicted) {
            Ok(o) => o,
            Err(BenchError::Solver(tinysdp::Error::NonFinite(_))) => {
                aborted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let solve_time = timer.elapsed().as_secs_f64();
        let u = out.u.zip_zip_map(&weights.u_lo, &weights.u_hi, |v, l, h| v.clamp(l, h));
        let (delta, eta_min, certified) = match &out.report {
            Some(r) => (r.delta, r.eta_min, Some(r.certified)),
            None => (f64::NAN, f64::NAN, None),
        };
        let next = sys.step(&x, &u);
        log.rows.push(StepRecord {
            t,
            x,
            u,
            delta,
            eta_min,
            certified,
            fallback: out.fallback,
            iterations: out.iterations,
            solve_time,
        });
        x = next;
        t = (step + 1) as f64 * scn.dt;
    }
    log.rows.push(StepRecord {
        t,
        x,
        u: DVector::zeros(scn.dim),
        delta: f64::NAN,
        eta_min: f64::NAN,
        certified: None,
        fallback: false,
        iterations: 0,
        solve_time: 0.0,
    });
    let mut metrics = compute_metrics(&log, scn)?;
    metrics.aborted = aborted;
    Ok((log, metrics))
}
