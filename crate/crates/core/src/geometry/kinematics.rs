use serde::{Deserialize, Serialize};

use super::{wrap_angle, GeometryError, Pose};

/// Longest single integration step taken inside [`propagate_state`], in seconds.
const MAX_SUBSTEP: f64 = 0.05;

/// Kinematic limits of the car-like interceptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    /// Distance between front and rear axles [m].
    pub wheelbase: f64,
    /// [m/s]
    pub max_speed: f64,
    /// [m/s^2]
    pub max_accel: f64,
    /// Steering angle bound [rad].
    pub max_steer: f64,
    /// `tan(max_steer) / wheelbase` [1/m].
    pub max_curvature: f64,
    /// Lateral (centripetal) acceleration bound [m/s^2].
    pub lateral_accel_limit: f64,
}

impl RobotParams {
    /// Builds parameters with the curvature bound derived from the steering bound.
    pub fn new(
        wheelbase: f64,
        max_speed: f64,
        max_accel: f64,
        max_steer: f64,
        lateral_accel_limit: f64,
    ) -> Result<Self, GeometryError> {
        let params = Self {
            wheelbase,
            max_speed,
            max_accel,
            max_steer,
            max_curvature: max_steer.tan() / wheelbase,
            lateral_accel_limit,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("wheelbase", self.wheelbase),
            ("max_speed", self.max_speed),
            ("max_accel", self.max_accel),
            ("max_steer", self.max_steer),
            ("max_curvature", self.max_curvature),
            ("lateral_accel_limit", self.lateral_accel_limit),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(GeometryError::InvalidParams(format!("{name} must be positive, got {value}")));
            }
        }
        if self.max_steer >= std::f64::consts::FRAC_PI_2 {
            return Err(GeometryError::InvalidParams("max_steer must be below pi/2".into()));
        }
        let expected = self.max_steer.tan() / self.wheelbase;
        if (expected - self.max_curvature).abs() > 1e-9 * expected.max(1.0) {
            return Err(GeometryError::InvalidParams(format!(
                "max_curvature {} inconsistent with tan(max_steer)/wheelbase = {expected}",
                self.max_curvature
            )));
        }
        Ok(())
    }

    /// Minimum turning radius `1 / max_curvature`.
    pub fn min_turn_radius(&self) -> f64 {
        1.0 / self.max_curvature
    }
}

/// Full kinematic state: pose, steering angle and forward speed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub delta: f64,
    pub v: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64, delta: f64, v: f64) -> Self {
        Self { x, y, theta, delta, v }
    }

    pub fn from_pose(pose: Pose, v: f64) -> Self {
        Self::new(pose.x, pose.y, pose.theta, 0.0, v)
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.theta)
    }

    fn is_finite(&self) -> bool {
        [self.x, self.y, self.theta, self.delta, self.v].iter().all(|v| v.is_finite())
    }
}

type Deriv = [f64; 5];

fn derivative(s: &Deriv, omega: f64, accel: f64, wheelbase: f64) -> Deriv {
    let [_, _, theta, delta, v] = *s;
    [v * theta.cos(), v * theta.sin(), v * delta.tan() / wheelbase, omega, accel]
}

fn rk4_step(s: Deriv, omega: f64, accel: f64, h: f64, wheelbase: f64) -> Deriv {
    let add = |a: &Deriv, k: &Deriv, f: f64| -> Deriv {
        let mut out = *a;
        for i in 0..5 {
            out[i] += f * k[i];
        }
        out
    };
    let k1 = derivative(&s, omega, accel, wheelbase);
    let k2 = derivative(&add(&s, &k1, h / 2.0), omega, accel, wheelbase);
    let k3 = derivative(&add(&s, &k2, h / 2.0), omega, accel, wheelbase);
    let k4 = derivative(&add(&s, &k3, h), omega, accel, wheelbase);
    let mut out = s;
    for i in 0..5 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Advances the car model by `dt` seconds with constant steering rate `omega`
/// and longitudinal acceleration `accel`.
///
/// Integration is classical RK4; intervals longer than 50 ms are split into
/// equal substeps. Steering and speed are clamped to the robot limits after
/// every substep.
pub fn propagate_state(
    s: &RobotState,
    omega: f64,
    accel: f64,
    dt: f64,
    params: &RobotParams,
) -> Result<RobotState, GeometryError> {
    if !s.is_finite() || !omega.is_finite() || !accel.is_finite() || !dt.is_finite() {
        return Err(GeometryError::NonFinite("propagate_state input"));
    }
    if dt <= 0.0 {
        return Err(GeometryError::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let steps = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut y: Deriv = [s.x, s.y, s.theta, s.delta, s.v];
    for _ in 0..steps {
        y = rk4_step(y, omega, accel, h, params.wheelbase);
        y[3] = y[3].clamp(-params.max_steer, params.max_steer);
        y[4] = y[4].clamp(-params.max_speed, params.max_speed);
    }
    Ok(RobotState::new(y[0], y[1], wrap_angle(y[2]), y[3], y[4]))
}
