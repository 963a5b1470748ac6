//! Planar geometry and kinematics shared by every planning stage.

mod dubins;
mod kinematics;
mod obstacle;

pub use dubins::{dubins_shortest, DubinsPath, DubinsWord};
pub use kinematics::{propagate_state, RobotParams, RobotState};
pub use obstacle::{obstacle_contains, signed_clearance, Clearance, Obstacle, ObstacleKind, WorldMap};

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planar point or vector in metres.
pub type Vec2 = nalgebra::Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),
    #[error("invalid obstacle polygon: {0}")]
    InvalidPolygon(String),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> Result<f64, GeometryError> {
    if !theta.is_finite() {
        return Err(GeometryError::NonFinite("angle"));
    }
    Ok(wrap_angle(theta))
}

/// Infallible variant of [`normalize_angle`] for values already known to be finite.
pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.position() - other.position()).norm()
    }

    /// Same position, heading flipped by pi.
    pub fn reversed(&self) -> Pose {
        Pose::new(self.x, self.y, wrap_angle(self.theta + PI))
    }
}
