//! Hybrid A* search over `(x, y, heading)` cells with forward-only arc primitives
//! and an analytic Dubins connection near the goal.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::f64::consts::TAU;

use ordered_float::OrderedFloat;
use thiserror::Error;

use crate::geometry::{dubins_shortest, propagate_state, Pose, RobotParams, RobotState, WorldMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start pose is in collision or outside the map")]
    StartBlocked,
    #[error("goal pose is in collision or outside the map")]
    GoalBlocked,
    #[error("open set exhausted after {expansions} expansions without reaching the goal")]
    NoPath { expansions: usize },
    #[error("invalid search grid: {0}")]
    InvalidGrid(String),
}

/// Search discretization and motion primitive set.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cell_size: f64,
    pub theta_bins: usize,
    /// Length of one motion primitive [m].
    pub arc_length: f64,
    /// Steering angles of the primitives [rad].
    pub steer_set: Vec<f64>,
}

impl GridSpec {
    /// Default discretization: 72 heading bins, primitives two cells long and five
    /// steering values spanning the steering range.
    pub fn for_robot(params: &RobotParams, cell_size: f64) -> Self {
        let d = params.max_steer;
        Self {
            cell_size,
            theta_bins: 72,
            arc_length: 2.0 * cell_size,
            steer_set: vec![-d, -d / 2.0, 0.0, d / 2.0, d],
        }
    }

    pub fn validate(&self, params: &RobotParams) -> Result<(), PlanError> {
        if !(self.cell_size > 0.0) {
            return Err(PlanError::InvalidGrid("cell_size must be positive".into()));
        }
        if self.theta_bins < 8 {
            return Err(PlanError::InvalidGrid("theta_bins must be at least 8".into()));
        }
        if !(self.arc_length > 0.0) {
            return Err(PlanError::InvalidGrid("arc_length must be positive".into()));
        }
        if self.steer_set.is_empty() || self.steer_set.iter().any(|s| s.abs() > params.max_steer + 1e-12) {
            return Err(PlanError::InvalidGrid("steer_set must be non-empty and within the steering bound".into()));
        }
        Ok(())
    }

    /// Distance from a search node to the goal below which a Dubins shot is attempted.
    pub fn shot_radius(&self) -> f64 {
        10.0 * self.arc_length
    }

    fn steer_change_penalty(&self) -> f64 {
        0.1 * self.arc_length
    }

    pub fn cell_of(&self, p: &Pose) -> (i64, i64, i64) {
        let bin = (p.theta.rem_euclid(TAU) / TAU * self.theta_bins as f64).floor() as i64;
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
            bin.rem_euclid(self.theta_bins as i64),
        )
    }
}

/// One node of the search tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub pose: Pose,
    pub g: f64,
    pub parent: Option<usize>,
    pub steer_index: Option<usize>,
}

/// Heuristic: the larger of the Dubins and straight-line distances to the goal.
pub fn heuristic(node: &Pose, goal: &Pose, r_min: f64) -> f64 {
    let dubins = dubins_shortest(*node, *goal, r_min).total_length;
    dubins.max(node.distance(goal))
}

fn pose_is_free(map: &WorldMap, p: &Pose) -> bool {
    let pos = p.position();
    map.in_bounds(pos) && map.static_clearance(pos).distance > 0.0
}

/// Analytic Dubins connection from `node` to `goal`, sampled every half primitive.
///
/// Returns the samples after `node` (ending exactly at `goal`) if every sample is
/// inside the map with positive static clearance, otherwise `None`.
pub fn dubins_shot(node: &Pose, goal: &Pose, map: &WorldMap, r_min: f64, arc_length: f64) -> Option<Vec<Pose>> {
    let path = dubins_shortest(*node, *goal, r_min);
    let mut samples = path.sample_spaced(arc_length / 2.0);
    if samples.iter().all(|p| pose_is_free(map, p)) {
        samples.remove(0);
        if let Some(last) = samples.last_mut() {
            *last = *goal;
        } else {
            samples.push(*goal);
        }
        Some(samples)
    } else {
        None
    }
}

/// One expansion recorded for inspection: parent pose, steering, child pose, edge cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub parent: Pose,
    pub steer: f64,
    pub child: Pose,
    pub cost: f64,
}

/// Search result with bookkeeping used by diagnostics and tests.
#[derive(Debug, Clone, Default)]
pub struct SearchTrace {
    pub expanded_cells: Vec<(i64, i64, i64)>,
    pub edges: Vec<Expansion>,
}

/// Forward motion primitive: constant steering for `arc_length` metres at unit speed.
pub fn primitive(from: &Pose, steer: f64, arc_length: f64, params: &RobotParams) -> Pose {
    let v = params.max_speed.min(1.0);
    let s = RobotState::new(from.x, from.y, from.theta, steer, v);
    propagate_state(&s, 0.0, 0.0, arc_length / v, params).expect("finite primitive input").pose()
}

fn primitive_samples(from: &Pose, steer: f64, arc_length: f64, cell: f64, params: &RobotParams) -> Vec<Pose> {
    let n = (arc_length / (0.5 * cell)).ceil().max(1.0) as usize;
    let v = params.max_speed.min(1.0);
    let dt = arc_length / v / n as f64;
    let mut s = RobotState::new(from.x, from.y, from.theta, steer, v);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        s = propagate_state(&s, 0.0, 0.0, dt, params).expect("finite primitive input");
        out.push(s.pose());
    }
    out
}

/// Plans a statically collision-free, curvature-feasible path from `start` to `goal`.
pub fn plan_path(
    map: &WorldMap,
    start: Pose,
    goal: Pose,
    grid: &GridSpec,
    params: &RobotParams,
) -> Result<Vec<Pose>, PlanError> {
    search(map, start, goal, grid, params, false).map(|(path, _)| path)
}

/// Full search; with `record` set the trace lists every expanded cell and edge.
pub fn search(
    map: &WorldMap,
    start: Pose,
    goal: Pose,
    grid: &GridSpec,
    params: &RobotParams,
    record: bool,
) -> Result<(Vec<Pose>, SearchTrace), PlanError> {
    grid.validate(params)?;
    if !pose_is_free(map, &start) {
        return Err(PlanError::StartBlocked);
    }
    if !pose_is_free(map, &goal) {
        return Err(PlanError::GoalBlocked);
    }
    let r_min = params.min_turn_radius();
    let mut trace = SearchTrace::default();
    let mut nodes = vec![SearchNode { pose: start, g: 0.0, parent: None, steer_index: None }];
    // key: f, then g, then insertion sequence
    let mut open = BinaryHeap::new();
    let mut seq = 0usize;
    open.push(Reverse((OrderedFloat(heuristic(&start, &goal, r_min)), OrderedFloat(0.0), seq, 0usize)));
    let mut best_g: HashMap<(i64, i64, i64), f64> = HashMap::new();
    best_g.insert(grid.cell_of(&start), 0.0);
    let mut closed: HashSet<(i64, i64, i64)> = HashSet::new();
    let mut expansions = 0usize;

    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        let node = nodes[idx].clone();
        let cell = grid.cell_of(&node.pose);
        if !closed.insert(cell) {
            continue;
        }
        expansions += 1;
        if record {
            trace.expanded_cells.push(cell);
        }

        if node.pose.distance(&goal) <= grid.shot_radius() {
            if let Some(shot) = dubins_shot(&node.pose, &goal, map, r_min, grid.arc_length) {
                let mut path = Vec::new();
                let mut cur = Some(idx);
                while let Some(i) = cur {
                    path.push(nodes[i].pose);
                    cur = nodes[i].parent;
                }
                path.reverse();
                path.extend(shot);
                return Ok((path, trace));
            }
        }

        for (k, &steer) in grid.steer_set.iter().enumerate() {
            let samples = primitive_samples(&node.pose, steer, grid.arc_length, grid.cell_size, params);
            if !samples.iter().all(|p| pose_is_free(map, p)) {
                continue;
            }
            let child = *samples.last().expect("at least one sample");
            let child_cell = grid.cell_of(&child);
            if closed.contains(&child_cell) {
                continue;
            }
            let mut cost = grid.arc_length;
            if node.steer_index.is_some_and(|s| s != k) {
                cost += grid.steer_change_penalty();
            }
            let g = node.g + cost;
            if best_g.get(&child_cell).is_some_and(|&b| b <= g) {
                continue;
            }
            best_g.insert(child_cell, g);
            if record {
                trace.edges.push(Expansion { parent: node.pose, steer, child, cost });
            }
            nodes.push(SearchNode { pose: child, g, parent: Some(idx), steer_index: Some(k) });
            seq += 1;
            let f = g + heuristic(&child, &goal, r_min);
            open.push(Reverse((OrderedFloat(f), OrderedFloat(g), seq, nodes.len() - 1)));
        }
    }
    Err(PlanError::NoPath { expansions })
}

/// Total polyline length of a waypoint sequence.
pub fn path_length(path: &[Pose]) -> f64 {
    path.windows(2).map(|w| w[0].distance(&w[1])).sum()
}
