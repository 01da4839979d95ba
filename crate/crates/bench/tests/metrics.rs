use nalgebra::DVector;
use tinysdp_bench::log::{StepRecord, TrajectoryLog};
use tinysdp_bench::{compute_metrics, simulate_closed_loop, Obstacle, Scenario};

const BASE: &str = r#"
name = "open-field"
dim = 2
dt = 0.04
horizon = 10
steps = 40
goal = [3.0, 4.0]

[weights]
q_pos = 1.0
q_vel = 1.0
r = 0.1
u_max = 3.0

[starts]
origin = [0.0, 0.0]
at-goal = [3.0, 4.0]
"#;

fn scenario(start: &str) -> Scenario {
    Scenario::from_toml(BASE, Some(start)).unwrap()
}

fn row(t: f64, p: [f64; 2]) -> StepRecord {
    StepRecord {
        t,
        x: DVector::from_column_slice(&[p[0], p[1], 0.0, 0.0]),
        u: DVector::zeros(2),
        delta: f64::NAN,
        eta_min: f64::NAN,
        certified: None,
        fallback: false,
        iterations: 0,
        solve_time: 0.0,
    }
}

#[test]
fn stationary_log_has_zero_path() {
    let log = TrajectoryLog { rows: vec![row(0.0, [1.0, 1.0]); 5] };
    let m = compute_metrics(&log, &scenario("origin")).unwrap();
    assert_eq!(m.path_length, 0.0);
    assert_eq!(m.certified_fraction, None);
    assert!(compute_metrics(&TrajectoryLog::default(), &scenario("origin")).is_err());
}

#[test]
fn two_point_log_is_a_3_4_5_triangle() {
    let log = TrajectoryLog { rows: vec![row(0.0, [0.0, 0.0]), row(0.04, [3.0, 4.0])] };
    let m = compute_metrics(&log, &scenario("origin")).unwrap();
    assert_eq!(m.path_length, 5.0);
    assert_eq!(m.final_goal_distance, 0.0);
    assert!(m.reached && m.success());
    assert_eq!(m.steps, 1);
}

#[test]
fn grazing_the_boundary_is_not_a_collision() {
    let mut scn = scenario("origin");
    // unit disk centered at (1, −1): the log passes exactly through (1, 0)
    scn.obstacles = vec![Obstacle::fixed(&[1.0, -1.0], 1.0)];
    let log = TrajectoryLog { rows: vec![row(0.0, [0.0, 0.0]), row(0.04, [1.0, 0.0]), row(0.08, [3.0, 4.0])] };
    let m = compute_metrics(&log, &scn).unwrap();
    assert_eq!(m.min_clearance, 0.0);
    assert!(!m.collided);
    // a hair further in is a collision
    let log = TrajectoryLog { rows: vec![row(0.0, [0.0, 0.0]), row(0.04, [1.0, -1e-9])] };
    let m = compute_metrics(&log, &scn).unwrap();
    assert!(m.collided && m.min_clearance < 0.0);
}

#[test]
fn start_at_goal_is_immediate_success() {
    let (log, m) = simulate_closed_loop(&scenario("at-goal")).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(m.path_length, 0.0);
    assert!(m.success());
}

#[test]
fn metrics_are_consistent_on_a_short_run() {
    let (log, m) = simulate_closed_loop(&scenario("origin")).unwrap();
    let first = log.rows[0].x.rows(0, 2).into_owned();
    let last = log.rows[log.len() - 1].x.rows(0, 2).into_owned();
    assert!(m.path_length + 1e-12 >= (last - first).norm());
    assert_eq!(m.collided, m.min_clearance < 0.0);
    assert_eq!(m.steps + 1, log.len());
    assert_eq!(m.certified_fraction, Some(1.0));
}
