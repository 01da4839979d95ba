use nalgebra::DVector;
use tinysdp::{CostForm, PsdBlock};
use tinysdp_bench::obstacle::min_clearance;
use tinysdp_bench::scenario::{builtin, ushape_file, ScenarioFile, BUILTIN};
use tinysdp_bench::{
    build_moving_gap, build_sweeping_barrier, build_ushape, build_vertical_gate, BenchError, Profile, Scenario,
    UShapeStart,
};

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Smallest clearance along the segment `a → b` at time `t`, sampled finely.
fn segment_clearance(scn: &Scenario, a: &DVector<f64>, b: &DVector<f64>, t: f64) -> f64 {
    (0..=2000)
        .map(|i| {
            let s = i as f64 / 2000.0;
            min_clearance(&scn.obstacles, &(a + (b - a) * s), t)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn ushape_geometry() {
    let inside = build_ushape(UShapeStart::Inside);
    let p0 = inside.position(&inside.start);
    let goal = inside.position(&inside.goal);
    // the arms span the arc of radius 2.5 around the origin; inside the cup
    // means within the inner rim and on the open side of the arc's chord
    assert!(p0.norm() < 2.0 && p0[0] > 0.0);
    assert!(segment_clearance(&inside, &p0, &goal, 0.0) < 0.0, "straight line misses the U");

    for start in UShapeStart::ALL {
        let scn = build_ushape(start);
        assert_eq!(scn.goal, inside.goal);
        assert_eq!(scn.start_name, start.name());
        assert!(min_clearance(&scn.obstacles, &scn.position(&scn.start), 0.0) > 0.0);
    }
    for w in inside.obstacles.windows(2) {
        let gap = (v(&w[0].center) - v(&w[1].center)).norm();
        assert!(gap < w[0].radius + w[1].radius, "consecutive disks do not overlap");
    }
    assert_eq!(ushape_file().start_names(), ["inside", "outside-center", "edge-up", "edge-down"]);
}

#[test]
fn moving_gap_opens_and_closes() {
    let scn = build_moving_gap();
    assert_eq!(scn.dim, 2);
    let moving: Vec<_> = scn.obstacles.iter().filter(|o| o.velocity_at(0.5).norm() > 0.0 || o.center_at(2.0) != v(&o.center)).collect();
    assert_eq!(scn.obstacles.len(), 3);
    assert_eq!(moving.len(), 2);
    let width = |t: f64| (moving[0].center_at(t) - moving[1].center_at(t)).norm() - moving[0].radius - moving[1].radius;
    let widths: Vec<f64> = (0..400).map(|i| width(i as f64 * 0.01)).collect();
    let need = 2.0 * scn.clearance;
    assert!(widths.iter().any(|&w| w < need), "never closes");
    assert!(widths.iter().any(|&w| w > need), "never opens");
}

#[test]
fn vertical_gate_blocks_the_straight_line_at_all_times() {
    let scn = build_vertical_gate();
    assert_eq!(scn.dim, 3);
    let (a, b) = (scn.position(&scn.start), scn.position(&scn.goal));
    for i in 0..200 {
        let t = i as f64 * 0.04;
        assert!(segment_clearance(&scn, &a, &b, t) < 0.0, "line clear at t = {t}");
    }
}

#[test]
fn sweeping_barrier_catches_every_planar_sidestep() {
    let scn = build_sweeping_barrier();
    assert_eq!(scn.dim, 3);
    let x_sweep = scn.obstacles[1].center[0];
    let height = scn.obstacles[1].center[2];
    // whichever lateral offset the robot picks at obstacle height, some sweep
    // phase puts a sphere on it
    for j in 0..=24 {
        let y = -1.2 + 0.1 * j as f64;
        let p = v(&[x_sweep, y, height]);
        let hit = (0..400).any(|i| min_clearance(&scn.obstacles, &p, i as f64 * 0.01) < 0.0);
        assert!(hit, "offset {y} is never swept");
    }
}

#[test]
fn builtins_resolve_and_match_the_constructors() {
    for name in BUILTIN {
        let scn = builtin(name, None).unwrap();
        assert_eq!(scn.name, name);
        assert_eq!(scn.horizon, 20);
        assert_eq!(scn.dt, 0.04);
    }
    assert_eq!(builtin("moving-gap", None).unwrap().obstacles, build_moving_gap().obstacles);
    assert!(matches!(builtin("nowhere", None), Err(BenchError::Config(_))));
    assert!(matches!(builtin("ushape", Some("sideways")), Err(BenchError::Config(_))));
}

const MINIMAL: &str = r#"
name = "tiny"
dim = 2
dt = 0.04
horizon = 10
steps = 50
goal = [1.0, 0.0]

[weights]
q_pos = 1.0
q_vel = 1.0
r = 0.1
u_max = 3.0

[starts]
a = [0.0, 0.0]
"#;

#[test]
fn config_errors() {
    let scn = Scenario::from_toml(MINIMAL, None).unwrap();
    assert_eq!(scn.start, v(&[0.0, 0.0, 0.0, 0.0]));
    assert_eq!(scn.goal_tolerance, 0.05);

    // parse errors carry the line
    let bad = MINIMAL.replace("horizon = 10", "horizon = \"ten\"");
    match Scenario::from_toml(&bad, None) {
        Err(e @ BenchError::Parse(_)) => assert!(e.to_string().contains("line 5"), "{e}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(Scenario::from_toml(&format!("{MINIMAL}\nbogus = 1\n"), None), Err(BenchError::Parse(_))));
    let blocked = format!("{MINIMAL}\n[[obstacles]]\ncenter = [0.0, 0.1]\nradius = 0.5\n");
    assert!(matches!(Scenario::from_toml(&blocked, None), Err(BenchError::Config(_))));
    let flat = MINIMAL.replace("dim = 2", "dim = 1").replace("[1.0, 0.0]", "[1.0]").replace("[0.0, 0.0]", "[0.0]");
    assert!(matches!(Scenario::from_toml(&flat, None), Err(BenchError::Config(_))));
    let short_start = MINIMAL.replace("a = [0.0, 0.0]", "a = [0.0, 0.0, 0.0]");
    assert!(matches!(Scenario::from_toml(&short_start, None), Err(BenchError::Config(_))));
    assert!(ScenarioFile::parse(MINIMAL).unwrap().resolve(Some("b")).is_err());
}

#[test]
fn profiles_and_overrides() {
    let mut scn = Scenario::from_toml(MINIMAL, None).unwrap();
    let cfg = scn.solver_config();
    assert_eq!((cfg.psd_block, cfg.cost_form, cfg.horizon), (PsdBlock::Full, CostForm::Moment, 10));
    scn = scn.with_profile(Profile::Hardware);
    let cfg = scn.solver_config();
    assert_eq!((cfg.psd_block, cfg.max_iter, cfg.horizon), (PsdBlock::PositionOnly, 5, 10));
    scn.solver.max_iter = Some(7);
    scn.solver.rho_psd = Some(2.5);
    let cfg = scn.solver_config();
    assert_eq!((cfg.max_iter, cfg.rho_psd), (7, 2.5));
    assert_eq!("hardware".parse::<Profile>().unwrap(), Profile::Hardware);
    assert!("desk".parse::<Profile>().is_err());
}
