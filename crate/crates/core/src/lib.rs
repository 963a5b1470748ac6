//! Moving-target interception planning for a car-like robot.
//!
//! The pipeline predicts the target from noisy position observations, plans a
//! kinematically feasible path to the predicted interception pose (Hybrid A*
//! plus gradient smoothing), and times the motion along that path with an
//! ST-graph search refined by a piecewise Bézier quadratic program.

pub mod bezier;
pub mod geometry;
pub mod hybrid_astar;
pub mod predictor;
pub mod qp;
pub mod scenario;
pub mod sim;
pub mod smoother;
pub mod speed;
pub mod st_graph;

pub use bezier::{BezierSegment, SpeedProfile};
pub use geometry::{Obstacle, ObstacleKind, Pose, RobotParams, RobotState, Vec2, WorldMap};
pub use hybrid_astar::{plan_path, GridSpec, PlanError};
pub use predictor::{fit_polynomial, interception_goal, ObservationBuffer, PolyTrajectory};
pub use qp::{solve_qp, QpProblem, QpSettings, QpSolution};
pub use scenario::{load_scenario, ScenarioError, ScenarioFile};
pub use sim::{
    check_collision, run_interception, summarize, InterceptionLog, NoiseModel, Outcome, Plan, RunSummary, Scenario,
    SpeedMode, TargetModel, Tracking,
};
pub use smoother::{smooth, PathPolyline, SmootherConfig};
pub use speed::{optimize_speed, SpeedConfig};
pub use st_graph::{Corridor, ReferenceProfile, STObstacle};
