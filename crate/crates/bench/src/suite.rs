//! Benchmark suites: the method × start matrix of each scenario, the LIN
//! margin search on the U-shape, and their CSV tables.
//!
//! Tables hold only quantities of the simulated trajectories, written in
//! shortest round-trip form, so a rerun reproduces them byte for byte. Wall
//! times are deliberately left out.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cache::load_or_build;
use crate::error::{BenchError, Result};
use crate::log::TrajectoryLog;
use crate::metrics::RunMetrics;
use crate::scenario::{builtin, Method, Scenario, UShapeStart};
use crate::sim::{simulate_with, SimOptions};

/// HOCBF margin of the "regardless of the margin" rows.
pub const HOCBF_WIDE_MARGIN: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Ushape,
    Dynamic,
    ThreeD,
    All,
}

impl FromStr for Suite {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ushape" => Ok(Suite::Ushape),
            "dynamic" => Ok(Suite::Dynamic),
            "3d" => Ok(Suite::ThreeD),
            "all" => Ok(Suite::All),
            "" => Err(BenchError::Config("empty suite name; expected ushape, dynamic, 3d or all".into())),
            other => Err(BenchError::Config(format!("unknown suite `{other}`; expected ushape, dynamic, 3d or all"))),
        }
    }
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Ushape => "ushape",
            Suite::Dynamic => "dynamic",
            Suite::ThreeD => "3d",
            Suite::All => "all",
        }
    }

    /// Scenario instances, one per start.
    pub fn scenarios(self) -> Result<Vec<Scenario>> {
        let ushape = || -> Result<Vec<Scenario>> {
            UShapeStart::ALL.iter().map(|s| builtin("ushape", Some(s.name()))).collect()
        };
        Ok(match self {
            Suite::Ushape => ushape()?,
            Suite::Dynamic => vec![builtin("moving-gap", None)?],
            Suite::ThreeD => vec![builtin("sweeping-barrier", None)?, builtin("vertical-gate", None)?],
            Suite::All => {
                let mut all = ushape()?;
                all.extend(Suite::Dynamic.scenarios()?);
                all.extend(Suite::ThreeD.scenarios()?);
                all
            }
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    pub tol_cert: Option<f64>,
    pub cache_dir: Option<PathBuf>,
}

impl SuiteOptions {
    fn sim_options(&self, scn: &Scenario) -> Result<SimOptions> {
        let mut opts = SimOptions::default();
        if let Some(t) = self.tol_cert {
            opts.tol_cert = t;
        }
        if let (Some(dir), Method::Tinysdp) = (&self.cache_dir, &scn.method) {
            opts.cache = Some(load_or_build(dir, scn)?);
        }
        Ok(opts)
    }
}

/// Runs one scenario, using the cache directory when one is configured.
pub fn run_scenario(scn: &Scenario, opts: &SuiteOptions) -> Result<(TrajectoryLog, RunMetrics)> {
    simulate_with(scn, &opts.sim_options(scn)?)
}

#[derive(Clone, Debug)]
pub struct SuiteRow {
    pub scenario: String,
    pub start: String,
    pub method: Method,
    /// Metrics, or the error that stopped the run.
    pub outcome: std::result::Result<RunMetrics, String>,
}

impl SuiteRow {
    pub fn safe(&self) -> bool {
        self.outcome.as_ref().is_ok_and(RunMetrics::safe)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: Suite,
    pub rows: Vec<SuiteRow>,
    /// LIN runs over the U-shape margin grid.
    pub ablation: Vec<SuiteRow>,
    /// Smallest grid margin at which LIN is safe on every U-shape start.
    pub lin_safe_margin: Option<f64>,
}

impl SuiteReport {
    pub fn tinysdp_all_safe(&self) -> bool {
        self.rows.iter().filter(|r| r.method == Method::Tinysdp).all(SuiteRow::safe)
    }

    pub fn row(&self, scenario: &str, start: &str, method: &Method) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.start == start && &r.method == method)
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from(
            "scenario,start,method,path_len,goal_dist,safe,reached,min_clearance,\
             certified_fraction,fallback_steps,mean_iterations,max_iterations,steps,status\n",
        );
        for r in &self.rows {
            write_row(&mut out, r);
        }
        out
    }

    pub fn ablation_csv(&self) -> String {
        let mut out = String::from("start,margin,safe,reached,min_clearance,path_len,goal_dist,status\n");
        for r in &self.ablation {
            let margin = match r.method {
                Method::Lin { margin } => margin,
                _ => f64::NAN,
            };
            match &r.outcome {
                Ok(m) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.start,
                    margin,
                    m.safe(),
                    m.reached,
                    m.min_clearance,
                    m.path_length,
                    m.final_goal_distance,
                    status(m)
                ),
                Err(e) => writeln!(out, "{},{margin},,,,,,error: {}", r.start, e.replace(',', ";")),
            }
            .expect("writing to a string");
        }
        out
    }
}

fn status(m: &RunMetrics) -> &'static str {
    if m.aborted { "aborted" } else { "ok" }
}

fn write_row(out: &mut String, r: &SuiteRow) {
    let lead = format!("{},{},{}", r.scenario, r.start, r.method.label().replace(',', ";"));
    match &r.outcome {
        Ok(m) => writeln!(
            out,
            "{lead},{},{},{},{},{},{},{},{},{},{},{}",
            m.path_length,
            m.final_goal_distance,
            m.safe(),
            m.reached,
            m.min_clearance,
            m.certified_fraction.map(|f| f.to_string()).unwrap_or_default(),
            m.fallback_steps,
            m.mean_iterations,
            m.max_iterations,
            m.steps,
            status(m)
        ),
        Err(e) => writeln!(out, "{lead},,,false,,,,,,,,error: {}", e.replace(',', ";")),
    }
    .expect("writing to a string");
}

fn run_all(jobs: &[Scenario], opts: &SuiteOptions) -> Vec<std::result::Result<RunMetrics, String>> {
    let one = |scn: &Scenario| run_scenario(scn, opts).map(|(_, m)| m).map_err(|e| e.to_string());
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(one).collect()
    }
}

fn methods_for(scn: &Scenario) -> Vec<Method> {
    let hocbf = |margin| Method::Hocbf { margin, alpha1: scn.hocbf.alpha1, alpha2: scn.hocbf.alpha2 };
    let mut out = vec![Method::Tinysdp, Method::Lin { margin: 0.0 }, hocbf(0.0)];
    if scn.name == "ushape" {
        out.push(hocbf(HOCBF_WIDE_MARGIN));
    }
    out
}

/// Runs a suite. Rows come in scenario order, then start order, then method
/// order; the LIN row at the searched margin follows the zero-margin LIN row.
pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    let scenarios = suite.scenarios()?;
    let mut jobs: Vec<Scenario> = Vec::new();
    for scn in &scenarios {
        for m in methods_for(scn) {
            jobs.push(scn.clone().with_method(m));
        }
    }
    let base = jobs.len();
    let ushape: Vec<&Scenario> = scenarios.iter().filter(|s| s.name == "ushape").collect();
    let grid = ushape.first().map(|s| s.lin.margin_grid.clone()).unwrap_or_default();
    for &margin in &grid {
        for scn in &ushape {
            jobs.push((*scn).clone().with_method(Method::Lin { margin }));
        }
    }
    let results = run_all(&jobs, opts);
    let to_row = |scn: &Scenario, outcome: std::result::Result<RunMetrics, String>| SuiteRow {
        scenario: scn.name.clone(),
        start: scn.start_name.clone(),
        method: scn.method.clone(),
        outcome,
    };
    let ablation: Vec<SuiteRow> =
        jobs[base..].iter().zip(&results[base..]).map(|(s, o)| to_row(s, o.clone())).collect();
    let lin_safe_margin = grid.iter().copied().find(|&m| {
        ablation.iter().filter(|r| r.method == Method::Lin { margin: m }).all(SuiteRow::safe)
    });

    let mut rows = Vec::with_capacity(base + ushape.len());
    for (scn, outcome) in jobs[..base].iter().zip(&results[..base]) {
        rows.push(to_row(scn, outcome.clone()));
        if scn.name == "ushape" && scn.method == (Method::Lin { margin: 0.0 }) {
            if let Some(m) = lin_safe_margin.filter(|&m| m != 0.0) {
                let found = ablation
                    .iter()
                    .find(|r| r.start == scn.start_name && r.method == Method::Lin { margin: m })
                    .expect("every grid margin ran on every start");
                rows.push(found.clone());
            }
        }
    }
    Ok(SuiteReport { suite, rows, ablation, lin_safe_margin })
}
