//! Inputs for the per-stage benchmarks: a scenario plus the intermediate
//! results of one full plan, so each stage can be timed in isolation.

use intercept_core::sim::{initial_observations, plan_initial, Plan};
use intercept_core::{ObservationBuffer, PathPolyline, Scenario, ScenarioFile, WorldMap};

pub struct Fixture {
    pub scenario: Scenario,
    pub observations: ObservationBuffer,
    /// Static obstacles only, as seen by the path stage.
    pub statics: WorldMap,
    /// Hybrid A* output before smoothing, with repeated points removed.
    pub raw_path: PathPolyline,
    pub plan: Plan,
}

/// Loads `scenarios/<name>.toml` from the workspace and plans it once.
pub fn fixture(name: &str) -> Fixture {
    let path = format!("{}/../../scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    let scenario = ScenarioFile::load(&path).and_then(|f| f.build(None)).unwrap_or_else(|e| panic!("{path}: {e}"));
    let observations = initial_observations(&scenario).expect("observations");
    let plan = plan_initial(&scenario).unwrap_or_else(|e| panic!("{name} does not plan: {}", e.message));
    let statics = WorldMap::new(scenario.map.width, scenario.map.height, scenario.map.static_obstacles().cloned().collect());
    let mut points = Vec::new();
    for p in plan.coarse.iter().map(|p| p.position()) {
        if points.last().is_none_or(|q: &intercept_core::Vec2| (p - q).norm() > 1e-6) {
            points.push(p);
        }
    }
    let raw_path = PathPolyline::new(points).expect("coarse path has at least two points");
    Fixture { scenario, observations, statics, raw_path, plan }
}
