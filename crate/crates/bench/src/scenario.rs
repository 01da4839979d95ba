//! Scenario definitions loaded from TOML documents.
//!
//! The built-in geometry lives in `scenarios/*.toml` and is embedded at
//! compile time, so a scenario name alone is enough to reproduce a run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use tinysdp::solver::Weights;
use tinysdp::{LiftedSystem, LinearSystem, SolverConfig};

use crate::error::{BenchError, Result};
use crate::obstacle::{min_clearance, Obstacle};

const USHAPE: &str = include_str!("../scenarios/ushape.toml");
const MOVING_GAP: &str = include_str!("../scenarios/moving_gap.toml");
const SWEEPING_BARRIER: &str = include_str!("../scenarios/sweeping_barrier.toml");
const VERTICAL_GATE: &str = include_str!("../scenarios/vertical_gate.toml");

/// Names accepted by [`builtin`].
pub const BUILTIN: [&str; 4] = ["ushape", "moving-gap", "sweeping-barrier", "vertical-gate"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingWeights {
    pub q_pos: f64,
    pub q_vel: f64,
    pub r: f64,
    pub u_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HocbfGains {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for HocbfGains {
    fn default() -> Self {
        Self { alpha1: 10.0, alpha2: 10.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinSettings {
    /// Margins tried, in order, when searching for a safe LIN margin.
    #[serde(default)]
    pub margin_grid: Vec<f64>,
}

/// Solver settings a scenario file may pin; unset fields keep the profile
/// defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iter: Option<usize>,
    pub rho_psd: Option<f64>,
    pub rho_box: Option<f64>,
    pub rho_obs: Option<f64>,
    pub gap_weight: Option<f64>,
    pub obstacle_inflation: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Simulation,
    Hardware,
}

impl FromStr for Profile {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulation" => Ok(Profile::Simulation),
            "hardware" => Ok(Profile::Hardware),
            other => Err(BenchError::Config(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Tinysdp,
    Lin { margin: f64 },
    Hocbf { margin: f64, alpha1: f64, alpha2: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Tinysdp => "tinysdp".into(),
            Method::Lin { margin } => format!("lin(margin={margin})"),
            Method::Hocbf { margin, .. } => format!("hocbf(margin={margin})"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Start variants of the U-shape scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UShapeStart {
    Inside,
    OutsideCenter,
    EdgeUp,
    EdgeDown,
}

impl UShapeStart {
    pub const ALL: [UShapeStart; 4] =
        [UShapeStart::Inside, UShapeStart::OutsideCenter, UShapeStart::EdgeUp, UShapeStart::EdgeDown];

    pub fn name(self) -> &'static str {
        match self {
            UShapeStart::Inside => "inside",
            UShapeStart::OutsideCenter => "outside-center",
            UShapeStart::EdgeUp => "edge-up",
            UShapeStart::EdgeDown => "edge-down",
        }
    }
}

impl FromStr for UShapeStart {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        UShapeStart::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown U-shape start `{s}`")))
    }
}

/// On-disk layout of a scenario document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub dim: usize,
    pub dt: f64,
    pub horizon: usize,
    pub steps: usize,
    pub goal: Vec<f64>,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    /// Robot clearance used to call a passage open or closed.
    #[serde(default)]
    pub clearance: f64,
    /// Obstacles farther than this from the robot are left out of a solve.
    #[serde(default)]
    pub sensing_range: Option<f64>,
    pub weights: TrackingWeights,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub hocbf: HocbfGains,
    #[serde(default)]
    pub lin: LinSettings,
    /// Named start positions (or full states); the first is the default.
    pub starts: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub start_order: Vec<String>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

fn default_goal_tolerance() -> f64 {
    0.05
}

/// A fully resolved closed-loop experiment.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub start_name: String,
    pub dim: usize,
    pub dt: f64,
    pub horizon: usize,
    pub steps: usize,
    pub start: DVector<f64>,
    pub goal: DVector<f64>,
    pub goal_tolerance: f64,
    pub clearance: f64,
    pub sensing_range: Option<f64>,
    pub weights: TrackingWeights,
    pub solver: SolverOverrides,
    pub hocbf: HocbfGains,
    pub lin: LinSettings,
    pub obstacles: Vec<Obstacle>,
    pub method: Method,
    pub profile: Profile,
}

fn full_state(v: &[f64], dim: usize, what: &str) -> Result<DVector<f64>> {
    match v.len() {
        n if n == dim => {
            let mut x = DVector::zeros(2 * dim);
            x.rows_mut(0, dim).copy_from_slice(v);
            Ok(x)
        }
        n if n == 2 * dim => Ok(DVector::from_column_slice(v)),
        n => Err(BenchError::Config(format!("{what} has {n} entries; expected {dim} or {}", 2 * dim))),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Start names in display order.
    pub fn start_names(&self) -> Vec<String> {
        if self.start_order.is_empty() {
            self.starts.keys().cloned().collect()
        } else {
            self.start_order.clone()
        }
    }

    pub fn resolve(&self, start: Option<&str>) -> Result<Scenario> {
        let names = self.start_names();
        let start_name = match start {
            Some(s) => s.to_string(),
            None => names.first().cloned().ok_or_else(|| BenchError::Config("scenario defines no starts".into()))?,
        };
        let raw = self
            .starts
            .get(&start_name)
            .ok_or_else(|| BenchError::Config(format!("scenario `{}` has no start `{start_name}`", self.name)))?;
        let scn = Scenario {
            name: self.name.clone(),
            start_name,
            dim: self.dim,
            dt: self.dt,
            horizon: self.horizon,
            steps: self.steps,
            start: full_state(raw, self.dim, "start")?,
            goal: full_state(&self.goal, self.dim, "goal")?,
            goal_tolerance: self.goal_tolerance,
            clearance: self.clearance,
            sensing_range: self.sensing_range,
            weights: self.weights.clone(),
            solver: self.solver.clone(),
            hocbf: self.hocbf,
            lin: self.lin.clone(),
            obstacles: self.obstacles.clone(),
            method: Method::Tinysdp,
            profile: Profile::Simulation,
        };
        scn.validate()?;
        Ok(scn)
    }
}

impl Scenario {
    pub fn from_toml(text: &str, start: Option<&str>) -> Result<Self> {
        ScenarioFile::parse(text)?.resolve(start)
    }

    pub fn load(path: &Path, start: Option<&str>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, start)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(BenchError::Config(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(self.dt > 0.0) || self.horizon == 0 || self.steps == 0 {
            return Err(BenchError::Config("dt, horizon and steps must be positive".into()));
        }
        let w = &self.weights;
        if !(w.q_pos > 0.0 && w.q_vel >= 0.0 && w.r > 0.0 && w.u_max > 0.0) {
            return Err(BenchError::Config("weights need q_pos > 0, q_vel >= 0, r > 0, u_max > 0".into()));
        }
        for o in &self.obstacles {
            o.validate(self.dim)?;
        }
        let p0 = self.start.rows(0, self.dim).into_owned();
        let g = self.goal.rows(0, self.dim).into_owned();
        if min_clearance(&self.obstacles, &p0, 0.0) <= 0.0 {
            return Err(BenchError::Config("start lies inside an obstacle".into()));
        }
        if min_clearance(&self.obstacles, &g, 0.0) <= 0.0 {
            return Err(BenchError::Config("goal lies inside an obstacle".into()));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn system(&self) -> Result<LinearSystem> {
        Ok(LinearSystem::double_integrator(self.dim, self.dt)?)
    }

    pub fn lifted(&self) -> Result<LiftedSystem> {
        Ok(LiftedSystem::double_integrator(self.dim, self.dt)?)
    }

    pub fn tracking_weights(&self) -> Weights {
        let d = self.dim;
        let w = &self.weights;
        let q = DMatrix::from_diagonal(&DVector::from_fn(2 * d, |i, _| if i < d { w.q_pos } else { w.q_vel }));
        Weights {
            q,
            r: DMatrix::identity(d, d) * w.r,
            qf: None,
            u_lo: DVector::from_element(d, -w.u_max),
            u_hi: DVector::from_element(d, w.u_max),
        }
    }

    /// Profile defaults, then the scenario's overrides, then the horizon.
    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = match self.profile {
            Profile::Simulation => SolverConfig::default(),
            Profile::Hardware => SolverConfig::hardware(),
        };
        let o = &self.solver;
        if let Some(v) = o.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = o.rho_psd {
            cfg.rho_psd = v;
        }
        if let Some(v) = o.rho_box {
            cfg.rho_box = v;
        }
        if let Some(v) = o.rho_obs {
            cfg.rho_obs = v;
        }
        if let Some(v) = o.gap_weight {
            cfg.gap_weight = v;
        }
        if let Some(v) = o.obstacle_inflation {
            cfg.obstacle_inflation = v;
        }
        if let Some(v) = o.eps {
            cfg.eps_primal = v;
            cfg.eps_dual = v;
        }
        cfg.horizon = self.horizon;
        cfg
    }

    pub fn position(&self, x: &DVector<f64>) -> DVector<f64> {
        x.rows(0, self.dim).into_owned()
    }
}

pub fn ushape_file() -> ScenarioFile {
    ScenarioFile::parse(USHAPE).expect("embedded U-shape scenario parses")
}

pub fn build_ushape(start: UShapeStart) -> Scenario {
    ushape_file().resolve(Some(start.name())).expect("embedded U-shape scenario is valid")
}

pub fn build_moving_gap() -> Scenario {
    Scenario::from_toml(MOVING_GAP, None).expect("embedded moving-gap scenario is valid")
}

pub fn build_sweeping_barrier() -> Scenario {
    Scenario::from_toml(SWEEPING_BARRIER, None).expect("embedded sweeping-barrier scenario is valid")
}

pub fn build_vertical_gate() -> Scenario {
    Scenario::from_toml(VERTICAL_GATE, None).expect("embedded vertical-gate scenario is valid")
}

/// Embedded document for a built-in scenario name.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "ushape" => Some(USHAPE),
        "moving-gap" => Some(MOVING_GAP),
        "sweeping-barrier" => Some(SWEEPING_BARRIER),
        "vertical-gate" => Some(VERTICAL_GATE),
        _ => None,
    }
}

pub fn builtin(name: &str, start: Option<&str>) -> Result<Scenario> {
    let text = builtin_source(name).ok_or_else(|| BenchError::Config(format!("unknown scenario `{name}`")))?;
    Scenario::from_toml(text, start)
}
