mod common;

use common::scenario;
use intercept_core::geometry::{Obstacle, Vec2, WorldMap};
use intercept_core::sim::{
    check_collision, observe, run_interception, InterceptionLog, LogRow, NoiseModel, Outcome, Scenario, SpeedMode, SpeedPlan, StageTimings,
};

#[test]
fn observation_noise_has_the_configured_moments() {
    let noise = NoiseModel { sigma1: 0.3, sigma2: 0.7, seed: 12345 };
    let truth = Vec2::new(4.0, -2.0);
    let n = 100_000;
    let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let e = observe(truth, &noise, k) - truth;
        sx += e.x;
        sy += e.y;
        sxx += e.x * e.x;
        syy += e.y * e.y;
    }
    let nf = n as f64;
    let (mx, my) = (sx / nf, sy / nf);
    assert!(mx.abs() <= 3.0 * noise.sigma1 / nf.sqrt(), "mean x {mx}");
    assert!(my.abs() <= 3.0 * noise.sigma2 / nf.sqrt(), "mean y {my}");
    let (vx, vy) = (sxx / nf - mx * mx, syy / nf - my * my);
    assert!((vx / noise.sigma1.powi(2) - 1.0).abs() <= 0.05, "var x {vx}");
    assert!((vy / noise.sigma2.powi(2) - 1.0).abs() <= 0.05, "var y {vy}");
    // Draw k does not depend on what was drawn before it.
    assert_eq!(observe(truth, &noise, 77), observe(truth, &noise, 77));
}

fn synthetic_log(rows: Vec<LogRow>) -> InterceptionLog {
    InterceptionLog {
        rows,
        observations: Vec::new(),
        plan: None,
        replans: 0,
        outcome: Outcome::Missed,
        miss_distance: f64::NAN,
        capture_time: None,
        timings: StageTimings::default(),
    }
}

fn row(t: f64, x: f64, y: f64) -> LogRow {
    LogRow {
        t,
        robot_x: x,
        robot_y: y,
        robot_theta: 0.0,
        robot_v: 0.0,
        robot_a: 0.0,
        station: 0.0,
        target_x: 0.0,
        target_y: 0.0,
        target_distance: f64::INFINITY,
        min_clearance: 0.0,
    }
}

#[test]
fn straight_pass_through_a_box_matches_the_analytic_interval() {
    let mut scn = scenario("minimal");
    let (x0, x1, inflation) = (8.0, 9.5, 0.25);
    let square = vec![Vec2::new(x0, 4.0), Vec2::new(x1, 4.0), Vec2::new(x1, 6.0), Vec2::new(x0, 6.0)];
    scn.map = WorldMap::new(20.0, 10.0, vec![Obstacle::new_static(0, square, inflation).unwrap()]);
    let (speed, dt) = (1.3, 0.01);
    let rows: Vec<LogRow> = (0..=1000).map(|k| k as f64 * dt).map(|t| row(t, 2.0 + speed * t, 5.0)).collect();
    let report = check_collision(&synthetic_log(rows), &scn);
    let t_in = (x0 - inflation - 2.0) / speed;
    let t_out = (x1 + inflation - 2.0) / speed;
    let first = report.violations.first().unwrap().t;
    let last = report.violations.last().unwrap().t;
    assert!((first - t_in).abs() <= dt && (last - t_out).abs() <= dt, "[{first}, {last}] vs [{t_in}, {t_out}]");
    assert!(report.violations.windows(2).all(|w| (w[1].t - w[0].t - dt).abs() < 1e-9), "violations are contiguous");
    for v in &report.violations {
        let x = 2.0 + speed * v.t;
        let depth = (x - (x0 - inflation)).min(x1 + inflation - x).min(1.0 + inflation);
        assert!((v.depth - depth).abs() <= 1e-9, "depth {} vs {depth}", v.depth);
    }
}

#[test]
fn collision_check_is_idempotent_and_runs_are_deterministic() {
    let scn = scenario("fig3");
    let a = run_interception(&scn);
    for _ in 0..2 {
        assert_eq!(common::log_fingerprint(&run_interception(&scn)), common::log_fingerprint(&a));
    }
    assert_eq!(check_collision(&a, &scn), check_collision(&a, &scn));
}

/// Distance from `p` to a polyline.
fn polyline_distance(pts: &[Vec2], p: Vec2) -> f64 {
    pts.windows(2)
        .map(|w| {
            let e = w[1] - w[0];
            let t = ((p - w[0]).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            (w[0] + t * e - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn playback_stays_on_the_path_and_books_energy() {
    for name in ["fig3", "fig4"] {
        let scn = scenario(name);
        let log = run_interception(&scn);
        let plan = log.plan.as_ref().unwrap();
        for r in &log.rows {
            let d = polyline_distance(&plan.smoothed.points, Vec2::new(r.robot_x, r.robot_y));
            assert!(d <= 1e-6, "{name}: robot {d} m off the path at t = {}", r.t);
        }
        let SpeedPlan::Optimized(profile) = &plan.speed else { panic!("{name}: no optimized profile") };
        let (exact, logged) = (profile.rms_accel(), log.rms_accel());
        assert!((logged - exact).abs() <= 0.02 * exact, "{name}: logged rms {logged} vs profile {exact}");
    }
}

fn assert_outcome_sound(scn: &Scenario, log: &InterceptionLog) {
    let clear = check_collision(log, scn).is_clear();
    let caught = log.rows.iter().any(|r| r.target_distance <= scn.plan.capture_radius);
    match log.outcome {
        Outcome::Collided => assert!(!clear),
        Outcome::Intercepted => assert!(clear && caught),
        Outcome::Missed => assert!(clear && !caught),
        Outcome::Infeasible { .. } => assert!(log.rows.is_empty()),
    }
}

#[test]
fn outcomes_agree_with_the_log() {
    for name in common::SCENARIOS {
        let mut scn = scenario(name);
        for mode in [SpeedMode::Optimized, SpeedMode::Uniform] {
            scn.plan.speed_mode = mode;
            assert_outcome_sound(&scn, &run_interception(&scn));
        }
    }
}

#[test]
fn minimal_scenario_is_intercepted() {
    let scn = scenario("minimal");
    let log = run_interception(&scn);
    assert_eq!(log.outcome, Outcome::Intercepted);
    assert!(log.miss_distance <= scn.plan.capture_radius);
}

/// For every ST obstacle, whether the robot passes above (ahead) or below (behind) it.
fn passing_sides(log: &InterceptionLog) -> Vec<(usize, bool)> {
    let plan = log.plan.as_ref().unwrap();
    let mut sides: Vec<(usize, bool)> = Vec::new();
    for o in &plan.st_obstacles {
        let tm = 0.5 * (o.t_in + o.t_out);
        let (s, _, _) = plan.speed.eval(tm);
        let ahead = s > o.upper_at(tm);
        assert!(ahead || s < o.lower_at(tm), "profile inside ST obstacle {} at t = {tm}", o.source);
        if let Some(prev) = sides.iter().find(|(id, _)| *id == o.source) {
            assert_eq!(prev.1, ahead, "obstacle {} passed on both sides", o.source);
        } else {
            sides.push((o.source, ahead));
        }
    }
    sides
}

#[test]
fn composite_scenario_passes_ahead_then_behind() {
    let mut scn = scenario("fig3");
    let log = run_interception(&scn);
    assert_eq!(log.outcome, Outcome::Intercepted);
    let sides = passing_sides(&log);
    let dynamic: Vec<usize> = scn.map.obstacles.iter().filter(|o| !o.is_static()).map(|o| o.id).collect();
    assert_eq!(sides, vec![(dynamic[0], true), (dynamic[1], false)]);

    scn.plan.speed_mode = SpeedMode::Uniform;
    assert_eq!(run_interception(&scn).outcome, Outcome::Collided);
}

#[test]
fn uniform_baseline_collides_where_the_optimized_profile_does_not() {
    let mut scn = scenario("fig4");
    assert_eq!(run_interception(&scn).outcome, Outcome::Intercepted);
    scn.plan.speed_mode = SpeedMode::Uniform;
    assert_eq!(run_interception(&scn).outcome, Outcome::Collided);
}
