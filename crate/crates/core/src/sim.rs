//! Closed-loop interception simulation.
//!
//! Time convention: `t = 0` is the planning instant. The target is observed at
//! `t = -(L-1) dt, ..., 0`, dynamic obstacle geometry is given at `t = 0`, and
//! the robot executes over `[0, T]`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bezier::SpeedProfile;
use crate::geometry::{obstacle_contains, propagate_state, signed_clearance, Obstacle, Pose, RobotParams, RobotState, Vec2, WorldMap};
use crate::hybrid_astar::{path_length, plan_path, GridSpec};
use crate::predictor::{fit_polynomial, interception_goal, predict_position, predict_velocity, ObservationBuffer, PolyTrajectory, PredictError};
use crate::smoother::{smooth, PathPolyline, SmootherConfig, TraceRow};
use crate::speed::{optimize_speed, segment_speed_caps, BoundaryConditions, SpeedConfig, SpeedLimits};
use crate::st_graph::{
    build_corridors_refined, dp_search, project_obstacles, uniform_segments, Corridor, DpConfig, ReferenceProfile, STGrid,
    STObstacle,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid target model: {0}")]
    InvalidTarget(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Linear target `x_{k+1} = A x_k + B u_k` with state `(x, y, vx, vy)`.
///
/// `B` passes only the last two control components (velocity channel), so the
/// first two components of every control are inert.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    pub x0: [f64; 4],
    /// Control applied at step `k`; the last entry repeats, an empty list means zero.
    pub controls: Vec<[f64; 4]>,
    pub dt: f64,
}

impl TargetModel {
    pub fn new(x0: [f64; 4], controls: Vec<[f64; 4]>, dt: f64) -> Result<Self, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidTarget(format!("dt must be positive, got {dt}")));
        }
        if x0.iter().chain(controls.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(SimError::InvalidTarget("non-finite state or control".into()));
        }
        Ok(Self { x0, controls, dt })
    }

    pub fn uniform(x0: [f64; 4], dt: f64) -> Result<Self, SimError> {
        Self::new(x0, Vec::new(), dt)
    }

    pub fn control(&self, k: usize) -> [f64; 4] {
        self.controls.get(k).or(self.controls.last()).copied().unwrap_or([0.0; 4])
    }

    pub fn step(&self, x: [f64; 4], k: usize) -> [f64; 4] {
        let u = self.control(k);
        [x[0] + self.dt * x[2], x[1] + self.dt * x[3], x[2] + u[2], x[3] + u[3]]
    }

    /// States `x_0, ..., x_n`.
    pub fn states(&self, n: usize) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.x0);
        for k in 0..n {
            let next = self.step(out[k], k);
            out.push(next);
        }
        out
    }

    /// Position at continuous time `t >= 0` since `x0`, moving with `v_k` during step `k`.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let t = t.max(0.0);
        let k = (t / self.dt).floor() as usize;
        let states = self.states(k);
        let x = states[k];
        let r = t - k as f64 * self.dt;
        Vec2::new(x[0] + r * x[2], x[1] + r * x[3])
    }

    /// Distance travelled over `[0, t]`.
    pub fn arc_length(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let k = (t / self.dt).floor() as usize;
        let states = self.states(k);
        let mut acc = 0.0;
        for x in &states[..k] {
            acc += self.dt * x[2].hypot(x[3]);
        }
        acc + (t - k as f64 * self.dt) * states[k][2].hypot(states[k][3])
    }
}

/// Successor states `x_1, ..., x_steps`.
pub fn simulate_target(model: &TargetModel, steps: usize) -> Vec<[f64; 4]> {
    let mut s = model.states(steps);
    s.remove(0);
    s
}

/// Independent Gaussian position noise; draw `k` uses ChaCha stream `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub sigma1: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma1: 0.0, sigma2: 0.0, seed: 0 }
    }
}

pub fn observe(truth: Vec2, noise: &NoiseModel, k: u64) -> Vec2 {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(k);
    let ex: f64 = StandardNormal.sample(&mut rng);
    let ey: f64 = StandardNormal.sample(&mut rng);
    Vec2::new(truth.x + noise.sigma1 * ex, truth.y + noise.sigma2 * ey)
}

/// Relative prediction errors at each horizon after the last of `observations`
/// samples taken at the target's control interval. The error is normalized by
/// the true distance travelled from the first observation to the prediction time.
pub fn prediction_errors(
    model: &TargetModel,
    noise: &NoiseModel,
    observations: usize,
    degree: usize,
    horizons: &[f64],
) -> Result<Vec<f64>, PredictError> {
    let samples = (0..observations).map(|k| {
        let t = k as f64 * model.dt;
        (t, observe(model.position_at(t), noise, k as u64))
    });
    let buf = ObservationBuffer::from_samples(observations, samples)?;
    let traj = fit_polynomial(&buf, degree)?;
    let t_last = (observations - 1) as f64 * model.dt;
    Ok(horizons
        .iter()
        .map(|h| {
            let t = t_last + h;
            let err = (predict_position(&traj, t) - model.position_at(t)).norm();
            err / model.arc_length(t).max(f64::EPSILON)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracking {
    /// Robot placed exactly on the path at the planned station.
    Playback,
    /// Pure-pursuit steering and speed tracking through the kinematic model.
    Pursuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedMode {
    Optimized,
    /// Constant speed `s_max / T` along the path, ignoring moving obstacles.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub horizon: f64,
    pub observations: usize,
    pub degree: usize,
    pub capture_radius: f64,
    pub cell_size: f64,
    pub theta_bins: usize,
    pub smoother: SmootherConfig,
    pub dp: DpConfig,
    pub nt: usize,
    pub ns: usize,
    pub segments: usize,
    pub min_segment: f64,
    /// Extra clearance around moving obstacles in the ST projection (per side).
    pub st_margin: f64,
    pub speed: SpeedConfig,
    pub sim_dt: f64,
    pub tracking: Tracking,
    pub replan_period: Option<f64>,
    pub speed_mode: SpeedMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Static and moving obstacles, already inflated for the robot footprint.
    pub map: WorldMap,
    pub robot_start: Pose,
    pub robot: RobotParams,
    pub v0: f64,
    pub a0: f64,
    pub target: TargetModel,
    pub noise: NoiseModel,
    pub plan: PlanConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.plan.horizon > 0.0) {
            return bad("plan.horizon must be positive".into());
        }
        if self.plan.observations < self.plan.degree + 1 {
            return bad(format!("{} observations cannot fit degree {}", self.plan.observations, self.plan.degree));
        }
        if !(self.plan.sim_dt > 0.0) || !(self.plan.capture_radius > 0.0) {
            return bad("plan.sim_dt and plan.capture_radius must be positive".into());
        }
        if self.robot.validate().is_err() {
            return bad("robot parameters are invalid".into());
        }
        if !self.map.in_bounds(self.robot_start.position()) {
            return bad("robot start lies outside the map".into());
        }
        let p = self.robot_start.position();
        if let Some(ob) = self.map.obstacles.iter().find(|o| obstacle_contains(o, p, 0.0)) {
            return bad(format!("robot start collides with obstacle {} at t = 0", ob.id));
        }
        Ok(())
    }

    /// Target time axis offset: model time of the planning instant.
    pub fn target_time_offset(&self) -> f64 {
        (self.plan.observations - 1) as f64 * self.target.dt
    }

    pub fn target_position(&self, t: f64) -> Vec2 {
        self.target.position_at(t + self.target_time_offset())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prediction,
    Path,
    Speed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub prediction: f64,
    pub path: f64,
    pub speed: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpeedPlan {
    Optimized(SpeedProfile),
    Uniform { s_max: f64, horizon: f64 },
}

impl SpeedPlan {
    /// `(s, s_dot, s_ddot)` at local time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        match self {
            SpeedPlan::Optimized(p) => p.eval(t),
            SpeedPlan::Uniform { s_max, horizon } => {
                let v = s_max / horizon;
                (v * t.clamp(0.0, *horizon), v, 0.0)
            }
        }
    }
}

/// Output of one pass through the planning pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Absolute start time of the plan.
    pub t0: f64,
    pub horizon: f64,
    pub prediction: PolyTrajectory,
    pub goal: Pose,
    pub coarse: Vec<Pose>,
    pub smoothed: PathPolyline,
    /// Smoother objective after every accepted step.
    pub smoother_trace: Vec<TraceRow>,
    pub st_obstacles: Vec<STObstacle>,
    pub reference: Option<ReferenceProfile>,
    pub corridor: Option<Corridor>,
    pub speed: SpeedPlan,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanFailure {
    pub stage: Stage,
    pub message: String,
    pub timings: StageTimings,
}

/// Below this predicted speed the goal heading is the bearing from the robot
/// instead of the (meaningless) target tangent.
const STATIONARY_SPEED: f64 = 1e-6;

fn shifted(ob: &Obstacle, t0: f64) -> Obstacle {
    let d = ob.velocity() * t0;
    let verts = ob.vertices().iter().map(|v| v + d).collect();
    Obstacle::new(ob.id, ob.kind, verts, ob.velocity(), ob.inflation()).expect("translation keeps a valid polygon")
}

fn dedup_points(poses: &[Pose]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(poses.len());
    for p in poses {
        let q = p.position();
        if pts.last().is_none_or(|l| (q - l).norm() > 1e-6) {
            pts.push(q);
        }
    }
    if pts.len() == 2 {
        let mid = 0.5 * (pts[0] + pts[1]);
        pts.insert(1, mid);
    }
    pts
}

/// Runs prediction, path search, smoothing and speed planning from `start` at
/// absolute time `t0`, intercepting at absolute time `scn.plan.horizon`.
pub fn plan_once(
    scn: &Scenario,
    buf: &ObservationBuffer,
    start: Pose,
    v0: f64,
    a0: f64,
    t0: f64,
) -> Result<Plan, PlanFailure> {
    let cfg = &scn.plan;
    let clock = Instant::now();
    let mut timings = StageTimings::default();
    let fail = |stage, message: String, timings: StageTimings| PlanFailure { stage, message, timings };

    let prediction = fit_polynomial(buf, cfg.degree).map_err(|e| fail(Stage::Prediction, e.to_string(), timings))?;
    let mut goal = interception_goal(&prediction, cfg.horizon);
    if predict_velocity(&prediction, cfg.horizon).norm() < STATIONARY_SPEED {
        let d = goal.position() - start.position();
        if d.norm() > 0.0 {
            goal.theta = d.y.atan2(d.x);
        }
    }
    timings.prediction = clock.elapsed().as_secs_f64();

    let lap = Instant::now();
    let statics = WorldMap::new(scn.map.width, scn.map.height, scn.map.static_obstacles().cloned().collect());
    let mut grid = GridSpec::for_robot(&scn.robot, cfg.cell_size);
    grid.theta_bins = cfg.theta_bins;
    let coarse = plan_path(&statics, start, goal, &grid, &scn.robot).map_err(|e| fail(Stage::Path, e.to_string(), timings))?;
    let raw = PathPolyline::new(dedup_points(&coarse)).map_err(|e| fail(Stage::Path, e.to_string(), timings))?;
    let smoothing = smooth(&raw, &statics, &cfg.smoother).map_err(|e| fail(Stage::Path, e.to_string(), timings))?;
    let (smoothed, smoother_trace) = (smoothing.path, smoothing.trace);
    timings.path = lap.elapsed().as_secs_f64();

    let lap = Instant::now();
    let horizon = cfg.horizon - t0;
    let s_max = smoothed.length();
    let movers: Vec<Obstacle> = scn.map.dynamic_obstacles().map(|o| shifted(o, t0)).collect();
    let st_obstacles = project_obstacles(&smoothed, &movers, horizon, 2.0 * cfg.st_margin);
    let (reference, corridor, speed) = match cfg.speed_mode {
        SpeedMode::Uniform => (None, None, SpeedPlan::Uniform { s_max, horizon }),
        SpeedMode::Optimized => {
            let st_err = |e: String| fail(Stage::Speed, e, timings);
            let st_grid = STGrid::new(horizon, s_max, cfg.nt, cfg.ns).map_err(|e| st_err(e.to_string()))?;
            let dp_cfg = DpConfig { v_max: scn.robot.max_speed, a_max: scn.robot.max_accel, ..cfg.dp.clone() };
            let reference = dp_search(&st_grid, &st_obstacles, &dp_cfg, v0).map_err(|e| st_err(e.to_string()))?;
            let corridor =
                build_corridors_refined(&reference, &st_obstacles, &uniform_segments(horizon, cfg.segments), cfg.min_segment)
                    .map_err(|e| st_err(e.to_string()))?;
            let limits = SpeedLimits {
                v_min: 0.0,
                v_max: segment_speed_caps(&corridor, &smoothed, scn.robot.max_speed, scn.robot.lateral_accel_limit),
                a_min: -scn.robot.max_accel,
                a_max: scn.robot.max_accel,
            };
            let sol = optimize_speed(&corridor, &reference, BoundaryConditions { v0, a0 }, &limits, &cfg.speed)
                .map_err(|e| st_err(e.to_string()))?;
            (Some(reference), Some(corridor), SpeedPlan::Optimized(sol.profile))
        }
    };
    timings.speed = lap.elapsed().as_secs_f64();
    timings.total = clock.elapsed().as_secs_f64();
    Ok(Plan { t0, horizon, prediction, goal, coarse, smoothed, smoother_trace, st_obstacles, reference, corridor, speed, timings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub robot_x: f64,
    pub robot_y: f64,
    pub robot_theta: f64,
    pub robot_v: f64,
    pub robot_a: f64,
    pub station: f64,
    pub target_x: f64,
    pub target_y: f64,
    pub target_distance: f64,
    pub min_clearance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub true_x: f64,
    pub true_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Intercepted,
    Missed,
    Collided,
    Infeasible { stage: Stage, message: String },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Intercepted => "intercepted",
            Outcome::Missed => "missed",
            Outcome::Collided => "collided",
            Outcome::Infeasible { .. } => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptionLog {
    pub rows: Vec<LogRow>,
    pub observations: Vec<ObservationRow>,
    /// The plan made at `t = 0`.
    pub plan: Option<Plan>,
    pub replans: usize,
    pub outcome: Outcome,
    /// Robot–target distance at `t = T`.
    pub miss_distance: f64,
    pub capture_time: Option<f64>,
    pub timings: StageTimings,
}

impl InterceptionLog {
    /// `sqrt(1/T * sum a^2 dt)` from the logged accelerations.
    pub fn rms_accel(&self) -> f64 {
        if self.rows.len() < 2 {
            return 0.0;
        }
        let dt = self.rows[1].t - self.rows[0].t;
        let horizon = self.rows.last().unwrap().t - self.rows[0].t;
        let sum: f64 = self.rows[..self.rows.len() - 1].iter().map(|r| r.robot_a * r.robot_a * dt).sum();
        (sum / horizon).sqrt()
    }

    pub fn min_clearance(&self) -> f64 {
        self.rows.iter().map(|r| r.min_clearance).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub obstacle: usize,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CollisionReport {
    pub violations: Vec<Violation>,
}

impl CollisionReport {
    pub fn is_clear(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks every logged robot position against every obstacle at that time.
pub fn check_collision(log: &InterceptionLog, scn: &Scenario) -> CollisionReport {
    let mut violations = Vec::new();
    for r in &log.rows {
        let p = Vec2::new(r.robot_x, r.robot_y);
        for ob in &scn.map.obstacles {
            if obstacle_contains(ob, p, r.t) {
                violations.push(Violation { t: r.t, obstacle: ob.id, depth: -ob.signed_distance(p, r.t).0 });
            }
        }
    }
    CollisionReport { violations }
}

/// Observation buffer of the latest `L` samples taken at or before `t`.
fn observations_until(scn: &Scenario, t: f64, log: &mut Vec<ObservationRow>) -> Result<ObservationBuffer, PredictError> {
    let dt = scn.target.dt;
    let l = scn.plan.observations;
    let last = ((t / dt) + 1e-9).floor() as i64 + (l as i64 - 1);
    let mut buf = ObservationBuffer::new(l)?;
    for k in (last + 1 - l as i64).max(0)..=last {
        let tk = (k - (l as i64 - 1)) as f64 * dt;
        let truth = scn.target.position_at(k as f64 * dt);
        let y = observe(truth, &scn.noise, k as u64);
        buf.push(tk, y)?;
        if !log.iter().any(|o| o.t == tk) {
            log.push(ObservationRow { t: tk, x: y.x, y: y.y, true_x: truth.x, true_y: truth.y });
        }
    }
    Ok(buf)
}

/// The `L` noisy observations available at the planning instant `t = 0`.
pub fn initial_observations(scn: &Scenario) -> Result<ObservationBuffer, PredictError> {
    observations_until(scn, 0.0, &mut Vec::new())
}

/// Pure-pursuit step toward the path point `lookahead` metres past `s_ref`.
fn pursuit_step(state: &RobotState, plan: &Plan, t_local: f64, dt: f64, params: &RobotParams) -> RobotState {
    let (s_ref, _, _) = plan.speed.eval(t_local);
    let (_, v_next, _) = plan.speed.eval(t_local + dt);
    let lookahead = (0.5 * state.v.abs()).max(1.0);
    let target = plan.smoothed.point_at(s_ref + lookahead);
    let d = target - Vec2::new(state.x, state.y);
    let alpha = d.y.atan2(d.x) - state.theta;
    let kappa = 2.0 * alpha.sin() / d.norm().max(1e-6);
    let delta_cmd = (kappa * params.wheelbase).atan().clamp(-params.max_steer, params.max_steer);
    let omega = (delta_cmd - state.delta) / dt;
    let accel = ((v_next - state.v) / dt).clamp(-params.max_accel, params.max_accel);
    propagate_state(state, omega, accel, dt, params).unwrap_or(*state)
}

/// The plan made at `t = 0` from the scenario's start state.
pub fn plan_initial(scn: &Scenario) -> Result<Plan, PlanFailure> {
    let fail = |stage, e: String| PlanFailure { stage, message: e, timings: StageTimings::default() };
    scn.validate().map_err(|e| fail(Stage::Prediction, e.to_string()))?;
    let buf = initial_observations(scn).map_err(|e| fail(Stage::Prediction, e.to_string()))?;
    plan_once(scn, &buf, scn.robot_start, scn.v0, scn.a0, 0.0)
}

/// Runs the full pipeline and rolls the robot out over `[0, T]`.
pub fn run_interception(scn: &Scenario) -> InterceptionLog {
    let cfg = &scn.plan;
    let mut observations = Vec::new();
    let infeasible = |stage, message: String, observations, timings| InterceptionLog {
        rows: Vec::new(),
        observations,
        plan: None,
        replans: 0,
        outcome: Outcome::Infeasible { stage, message },
        miss_distance: f64::NAN,
        capture_time: None,
        timings,
    };
    if let Err(e) = scn.validate() {
        return infeasible(Stage::Prediction, e.to_string(), observations, StageTimings::default());
    }
    let buf = match observations_until(scn, 0.0, &mut observations) {
        Ok(b) => b,
        Err(e) => return infeasible(Stage::Prediction, e.to_string(), observations, StageTimings::default()),
    };
    let first = match plan_once(scn, &buf, scn.robot_start, scn.v0, scn.a0, 0.0) {
        Ok(p) => p,
        Err(f) => return infeasible(f.stage, f.message, observations, f.timings),
    };
    let timings = first.timings;

    let steps = (cfg.horizon / cfg.sim_dt).round() as usize;
    let mut plan = first.clone();
    let mut replans = 0;
    let mut next_replan = cfg.replan_period;
    let mut state = RobotState::from_pose(scn.robot_start, scn.v0);
    let mut travelled = 0.0;
    let mut rows = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = if k == steps { cfg.horizon } else { k as f64 * cfg.sim_dt };
        if let Some(tr) = next_replan {
            if t >= tr - 1e-9 && cfg.horizon - t > 0.5 * cfg.replan_period.unwrap_or(0.0) {
                let (_, v_now, a_now) = plan.speed.eval(t - plan.t0);
                let start = Pose::new(state.x, state.y, state.theta);
                if let Ok(b) = observations_until(scn, t, &mut observations) {
                    if let Ok(p) = plan_once(scn, &b, start, v_now.max(0.0), a_now, t) {
                        plan = p;
                        replans += 1;
                        travelled = 0.0;
                    }
                }
                next_replan = Some(tr + cfg.replan_period.unwrap_or(f64::INFINITY));
            }
        }
        let local = t - plan.t0;
        let (s, v, a) = plan.speed.eval(local);
        match cfg.tracking {
            Tracking::Playback => {
                let p = plan.smoothed.point_at(s);
                state = RobotState::new(p.x, p.y, plan.smoothed.heading_at(s), 0.0, v);
                travelled = s;
            }
            Tracking::Pursuit => {
                if k > 0 {
                    let prev = state;
                    state = pursuit_step(&prev, &plan, local - cfg.sim_dt, cfg.sim_dt, &scn.robot);
                    travelled += (Vec2::new(state.x, state.y) - Vec2::new(prev.x, prev.y)).norm();
                }
            }
        }
        let robot = Vec2::new(state.x, state.y);
        let target = scn.target_position(t);
        let clearance = signed_clearance(&scn.map, robot, t).distance;
        rows.push(LogRow {
            t,
            robot_x: robot.x,
            robot_y: robot.y,
            robot_theta: state.theta,
            robot_v: if cfg.tracking == Tracking::Playback { v } else { state.v },
            robot_a: a,
            station: travelled,
            target_x: target.x,
            target_y: target.y,
            target_distance: (robot - target).norm(),
            min_clearance: clearance,
        });
    }
    observations.sort_by(|a, b| a.t.total_cmp(&b.t));

    let capture_time = rows.iter().find(|r| r.target_distance <= cfg.capture_radius).map(|r| r.t);
    let miss_distance = rows.last().map_or(f64::NAN, |r| r.target_distance);
    let mut log = InterceptionLog {
        rows,
        observations,
        plan: Some(first),
        replans,
        outcome: Outcome::Missed,
        miss_distance,
        capture_time,
        timings,
    };
    log.outcome = if !check_collision(&log, scn).is_clear() {
        Outcome::Collided
    } else if capture_time.is_some() {
        Outcome::Intercepted
    } else {
        Outcome::Missed
    };
    log
}

/// Run-level summary record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub outcome: String,
    pub stage: String,
    pub miss_distance: f64,
    pub capture_time: Option<f64>,
    pub min_clearance: f64,
    pub coarse_length: f64,
    pub smoothed_length: f64,
    pub smoothed_max_curvature: f64,
    pub max_accel: f64,
    pub rms_accel_profile: f64,
    pub rms_accel_log: f64,
    pub replans: usize,
}

pub fn summarize(scn: &Scenario, log: &InterceptionLog) -> RunSummary {
    let stage = match &log.outcome {
        Outcome::Infeasible { stage, .. } => format!("{stage:?}").to_lowercase(),
        _ => String::new(),
    };
    let (coarse_length, smoothed_length, smoothed_max_curvature, max_accel, rms_profile) = match &log.plan {
        Some(p) => {
            let (max_a, rms) = match &p.speed {
                SpeedPlan::Optimized(sp) => (sp.max_abs_accel(), sp.rms_accel()),
                SpeedPlan::Uniform { .. } => (0.0, 0.0),
            };
            (path_length(&p.coarse), p.smoothed.length(), p.smoothed.max_curvature(), max_a, rms)
        }
        None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    };
    RunSummary {
        scenario: scn.name.clone(),
        outcome: log.outcome.label().to_string(),
        stage,
        miss_distance: log.miss_distance,
        capture_time: log.capture_time,
        min_clearance: log.min_clearance(),
        coarse_length,
        smoothed_length,
        smoothed_max_curvature,
        max_accel,
        rms_accel_profile: rms_profile,
        rms_accel_log: log.rms_accel(),
        replans: log.replans,
    }
}
