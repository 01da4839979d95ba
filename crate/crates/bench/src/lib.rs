//! Closed-loop benchmarks for the lifted solver: scenario definitions,
//! obstacle prediction, the LIN and HOCBF comparison methods, simulation,
//! metric tables and the on-disk cache store.

pub mod baselines;
pub mod cache;
pub mod error;
pub mod log;
pub mod metrics;
pub mod obstacle;
pub mod scenario;
pub mod sim;
pub mod suite;

pub use error::{BenchError, Result};
pub use log::{StepRecord, TrajectoryLog};
pub use metrics::{compute_metrics, RunMetrics};
pub use obstacle::{predict_obstacles, Motion, Obstacle};
pub use scenario::{
    build_moving_gap, build_sweeping_barrier, build_ushape, build_vertical_gate, Method, Profile, Scenario,
    UShapeStart,
};
pub use sim::{simulate_closed_loop, simulate_with, SimOptions};
pub use suite::{run_scenario, run_suite, Suite, SuiteOptions, SuiteReport};
