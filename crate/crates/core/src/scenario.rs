//! TOML scenario files.
//!
//! Coordinates are metres in the map frame `[0, width] x [0, height]`, angles
//! radians, times seconds. Dynamic obstacle polygons are given at the planning
//! instant `t = 0`; the target state `x0` is its state at the first observation,
//! `(observations - 1) * dt` seconds earlier. See `docs/scenario-format.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Obstacle, Pose, RobotParams, Vec2, WorldMap};
use crate::qp::QpSettings;
use crate::sim::{NoiseModel, PlanConfig, Scenario, SpeedMode, TargetModel, Tracking};
use crate::smoother::SmootherConfig;
use crate::speed::SpeedConfig;
use crate::st_graph::DpConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { key: key.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub map: MapBlock,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub static_obstacles: Vec<StaticObstacleBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dynamic_obstacles: Vec<DynamicObstacleBlock>,
    pub robot: RobotBlock,
    pub target: TargetBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub plan: PlanBlock,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBlock {
    pub width: f64,
    pub height: f64,
    /// Hybrid A* cell size [m].
    #[serde(default = "one")]
    pub cell: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticObstacleBlock {
    pub polygon: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicObstacleBlock {
    pub polygon: Vec<[f64; 2]>,
    pub velocity: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotBlock {
    /// `[x, y, theta]`
    pub start: [f64; 3],
    #[serde(default)]
    pub v0: f64,
    #[serde(default)]
    pub a0: f64,
    #[serde(default = "d_wheelbase")]
    pub wheelbase: f64,
    #[serde(default = "d_max_speed")]
    pub max_speed: f64,
    #[serde(default = "one")]
    pub max_accel: f64,
    #[serde(default = "d_max_steer")]
    pub max_steer: f64,
    #[serde(default = "d_lateral")]
    pub lateral_accel_limit: f64,
    /// `[length, width]`; obstacles without an explicit inflation are grown by
    /// half its diagonal.
    #[serde(default = "d_footprint")]
    pub footprint: [f64; 2],
}

fn d_wheelbase() -> f64 {
    1.0
}
fn d_max_speed() -> f64 {
    2.0
}
fn d_max_steer() -> f64 {
    0.5
}
fn d_lateral() -> f64 {
    2.0
}
fn d_footprint() -> [f64; 2] {
    [0.4, 0.2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Uniform,
    Controls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetBlock {
    /// `[x, y, vx, vy]` at the first observation.
    pub x0: [f64; 4],
    #[serde(default = "one")]
    pub dt: f64,
    #[serde(default = "d_mode")]
    pub mode: TargetMode,
    /// Per-step controls `[u1, u2, u3, u4]`; only `u3, u4` act (on velocity).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<[f64; 4]>,
}

fn d_mode() -> TargetMode {
    TargetMode::Uniform
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(default)]
    pub sigma1: f64,
    #[serde(default)]
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanBlock {
    pub horizon: f64,
    pub observations: usize,
    pub degree: usize,
    pub capture_radius: f64,
    pub theta_bins: usize,
    pub st_margin: f64,
    pub nt: usize,
    pub ns: usize,
    pub segments: usize,
    pub min_segment: f64,
    pub sim_dt: f64,
    pub tracking: Tracking,
    pub speed_mode: SpeedMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replan_period: Option<f64>,
    pub smoother: SmootherBlock,
    pub dp: DpBlock,
    pub speed: SpeedBlock,
}

impl Default for PlanBlock {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            observations: 15,
            degree: crate::predictor::DEFAULT_DEGREE,
            capture_radius: 0.3,
            theta_bins: 72,
            st_margin: 0.1,
            nt: 20,
            ns: 100,
            segments: 5,
            min_segment: 0.25,
            sim_dt: 0.01,
            tracking: Tracking::Playback,
            speed_mode: SpeedMode::Optimized,
            replan_period: None,
            smoother: SmootherBlock::default(),
            dp: DpBlock::default(),
            speed: SpeedBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmootherBlock {
    pub w_obs: f64,
    pub w_cur: f64,
    pub w_smo: f64,
    /// Gradient step size, shared by all three terms.
    pub step: f64,
    pub d_max: f64,
    pub max_iters: usize,
}

impl Default for SmootherBlock {
    fn default() -> Self {
        Self { w_obs: 0.1, w_cur: 0.1, w_smo: 0.2, step: 0.25, d_max: 1.0, max_iters: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpBlock {
    pub w_ref: f64,
    pub w_acc: f64,
    pub w_clear: f64,
    pub clear_margin: f64,
}

impl Default for DpBlock {
    fn default() -> Self {
        let d = DpConfig::default();
        Self { w_ref: d.w_ref, w_acc: d.w_acc, w_clear: d.w_clear, clear_margin: d.clear_margin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedBlock {
    pub w1: f64,
    pub w2: f64,
    pub order: usize,
    pub hard_terminal: bool,
}

impl Default for SpeedBlock {
    fn default() -> Self {
        Self { w1: 10.0, w2: 3.0, order: 5, hard_terminal: false }
    }
}

fn positive(key: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be non-negative, got {v}")))
    }
}

fn finite(key: &str, vals: &[f64]) -> Result<(), ScenarioError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(key, "must be finite"))
    }
}

fn polygon(pts: &[[f64; 2]]) -> Vec<Vec2> {
    pts.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text)
    }

    /// Canonical text: every default written out, fixed key order.
    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn default_inflation(&self) -> f64 {
        0.5 * self.robot.footprint[0].hypot(self.robot.footprint[1])
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != FORMAT_VERSION {
            return Err(invalid("version", format!("unsupported version {}, expected {FORMAT_VERSION}", self.version)));
        }
        positive("map.width", self.map.width)?;
        positive("map.height", self.map.height)?;
        positive("map.cell", self.map.cell)?;

        let r = &self.robot;
        finite("robot.start", &r.start)?;
        non_negative("robot.v0", r.v0)?;
        finite("robot.a0", &[r.a0])?;
        positive("robot.wheelbase", r.wheelbase)?;
        positive("robot.max_speed", r.max_speed)?;
        positive("robot.max_accel", r.max_accel)?;
        positive("robot.max_steer", r.max_steer)?;
        if r.max_steer >= std::f64::consts::FRAC_PI_2 {
            return Err(invalid("robot.max_steer", "must be below pi/2"));
        }
        positive("robot.lateral_accel_limit", r.lateral_accel_limit)?;
        non_negative("robot.footprint", r.footprint[0])?;
        non_negative("robot.footprint", r.footprint[1])?;
        if r.v0 > r.max_speed {
            return Err(invalid("robot.v0", format!("exceeds robot.max_speed {}", r.max_speed)));
        }
        let p = Vec2::new(r.start[0], r.start[1]);
        if !(p.x >= 0.0 && p.x <= self.map.width && p.y >= 0.0 && p.y <= self.map.height) {
            return Err(invalid("robot.start", "outside the map"));
        }

        let t = &self.target;
        finite("target.x0", &t.x0)?;
        positive("target.dt", t.dt)?;
        match (t.mode, t.controls.is_empty()) {
            (TargetMode::Uniform, false) => return Err(invalid("target.controls", "not allowed with mode = \"uniform\"")),
            (TargetMode::Controls, true) => return Err(invalid("target.controls", "required with mode = \"controls\"")),
            _ => {}
        }
        for (i, u) in t.controls.iter().enumerate() {
            finite(&format!("target.controls[{i}]"), u)?;
        }

        non_negative("noise.sigma1", self.noise.sigma1)?;
        non_negative("noise.sigma2", self.noise.sigma2)?;

        let pl = &self.plan;
        positive("plan.horizon", pl.horizon)?;
        if pl.degree == 0 {
            return Err(invalid("plan.degree", "must be at least 1"));
        }
        if pl.observations < pl.degree + 1 {
            return Err(invalid("plan.observations", format!("needs at least degree + 1 = {}", pl.degree + 1)));
        }
        positive("plan.capture_radius", pl.capture_radius)?;
        if pl.theta_bins < 8 {
            return Err(invalid("plan.theta_bins", "must be at least 8"));
        }
        non_negative("plan.st_margin", pl.st_margin)?;
        for (key, v) in [("plan.nt", pl.nt), ("plan.ns", pl.ns), ("plan.segments", pl.segments)] {
            if v == 0 {
                return Err(invalid(key, "must be at least 1"));
            }
        }
        positive("plan.min_segment", pl.min_segment)?;
        positive("plan.sim_dt", pl.sim_dt)?;
        if pl.sim_dt > pl.horizon {
            return Err(invalid("plan.sim_dt", "exceeds plan.horizon"));
        }
        if let Some(rp) = pl.replan_period {
            positive("plan.replan_period", rp)?;
        }
        let s = &pl.smoother;
        for (key, v) in [
            ("plan.smoother.w_obs", s.w_obs),
            ("plan.smoother.w_cur", s.w_cur),
            ("plan.smoother.w_smo", s.w_smo),
            ("plan.smoother.step", s.step),
            ("plan.smoother.d_max", s.d_max),
            ("plan.speed.w1", pl.speed.w1),
        ] {
            positive(key, v)?;
        }
        for (key, v) in [
            ("plan.dp.w_ref", pl.dp.w_ref),
            ("plan.dp.w_acc", pl.dp.w_acc),
            ("plan.dp.w_clear", pl.dp.w_clear),
            ("plan.dp.clear_margin", pl.dp.clear_margin),
            ("plan.speed.w2", pl.speed.w2),
        ] {
            non_negative(key, v)?;
        }
        if pl.speed.order < 4 {
            return Err(invalid("plan.speed.order", "must be at least 4"));
        }

        for (i, o) in self.static_obstacles.iter().enumerate() {
            let key = format!("static_obstacles[{i}]");
            for pt in &o.polygon {
                finite(&format!("{key}.polygon"), pt)?;
            }
            if let Some(inf) = o.inflation {
                non_negative(&format!("{key}.inflation"), inf)?;
            }
        }
        for (i, o) in self.dynamic_obstacles.iter().enumerate() {
            let key = format!("dynamic_obstacles[{i}]");
            for pt in &o.polygon {
                finite(&format!("{key}.polygon"), pt)?;
            }
            finite(&format!("{key}.velocity"), &o.velocity)?;
            if let Some(inf) = o.inflation {
                non_negative(&format!("{key}.inflation"), inf)?;
            }
        }
        self.obstacles().map(|_| ())
    }

    fn obstacles(&self) -> Result<Vec<Obstacle>, ScenarioError> {
        let default = self.default_inflation();
        let mut out = Vec::new();
        for (i, o) in self.static_obstacles.iter().enumerate() {
            let ob = Obstacle::new_static(out.len(), polygon(&o.polygon), o.inflation.unwrap_or(default))
                .map_err(|e| invalid(format!("static_obstacles[{i}].polygon"), e.to_string()))?;
            out.push(ob);
        }
        for (i, o) in self.dynamic_obstacles.iter().enumerate() {
            let v = Vec2::new(o.velocity[0], o.velocity[1]);
            let ob = Obstacle::new_dynamic(out.len(), polygon(&o.polygon), v, o.inflation.unwrap_or(default))
                .map_err(|e| invalid(format!("dynamic_obstacles[{i}].polygon"), e.to_string()))?;
            out.push(ob);
        }
        Ok(out)
    }

    pub fn robot_params(&self) -> Result<RobotParams, ScenarioError> {
        let r = &self.robot;
        RobotParams::new(r.wheelbase, r.max_speed, r.max_accel, r.max_steer, r.lateral_accel_limit)
            .map_err(|e| invalid("robot", e.to_string()))
    }

    /// Builds the runtime scenario, with the seed override applied if given.
    pub fn build(&self, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
        self.validate()?;
        let robot = self.robot_params()?;
        let map = WorldMap::new(self.map.width, self.map.height, self.obstacles()?);
        let t = &self.target;
        let target = TargetModel::new(t.x0, t.controls.clone(), t.dt).map_err(|e| invalid("target", e.to_string()))?;
        let pl = &self.plan;
        let mut smoother = SmootherConfig::with_limits(pl.smoother.d_max, robot.max_curvature);
        smoother.w_obs = pl.smoother.w_obs;
        smoother.w_cur = pl.smoother.w_cur;
        smoother.w_smo = pl.smoother.w_smo;
        smoother.steps = [pl.smoother.step; 3];
        smoother.max_iters = pl.smoother.max_iters;
        let plan = PlanConfig {
            horizon: pl.horizon,
            observations: pl.observations,
            degree: pl.degree,
            capture_radius: pl.capture_radius,
            cell_size: self.map.cell,
            theta_bins: pl.theta_bins,
            smoother,
            dp: DpConfig {
                w_ref: pl.dp.w_ref,
                w_acc: pl.dp.w_acc,
                w_clear: pl.dp.w_clear,
                clear_margin: pl.dp.clear_margin,
                v_max: robot.max_speed,
                a_max: robot.max_accel,
            },
            nt: pl.nt,
            ns: pl.ns,
            segments: pl.segments,
            min_segment: pl.min_segment,
            st_margin: pl.st_margin,
            speed: SpeedConfig {
                order: pl.speed.order,
                w1: pl.speed.w1,
                w2: pl.speed.w2,
                hard_terminal: pl.speed.hard_terminal,
                terminal_speed: None,
                terminal_accel: None,
                qp: QpSettings::default(),
            },
            sim_dt: pl.sim_dt,
            tracking: pl.tracking,
            replan_period: pl.replan_period,
            speed_mode: pl.speed_mode,
        };
        let r = &self.robot;
        let scn = Scenario {
            name: self.name.clone(),
            map,
            robot_start: Pose::new(r.start[0], r.start[1], r.start[2]),
            robot,
            v0: r.v0,
            a0: r.a0,
            target,
            noise: NoiseModel { sigma1: self.noise.sigma1, sigma2: self.noise.sigma2, seed: seed.unwrap_or(self.seed) },
            plan,
        };
        scn.validate().map_err(|e| invalid("robot.start", e.to_string()))?;
        Ok(scn)
    }
}

/// Reads, validates and builds a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    ScenarioFile::load(path)?.build(None)
}
