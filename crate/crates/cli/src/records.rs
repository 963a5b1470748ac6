//! Row types for every CSV the tool writes, plus helpers to write and read them.
//!
//! Plots are rendered only from these files, so each struct derives both
//! `Serialize` and `Deserialize`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRow {
    pub horizon: f64,
    pub mean_error: f64,
    pub max_error: f64,
    pub trials: u64,
}

/// One vertex of a polyline. `kind` is `coarse`, `smoothed`, `prediction`,
/// `target` or `robot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub kind: String,
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

/// One vertex of an inflated obstacle polygon at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleRow {
    pub id: usize,
    pub kind: String,
    pub vertex: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub iteration: usize,
    pub obstacle: f64,
    pub curvature: f64,
    pub smoothness: f64,
    pub total: f64,
}

/// Long-format ST graph. `kind` is `obstacle`, `reference`, `corridor_lower`,
/// `corridor_upper`, `profile` or `uniform`; `id` groups the points of one
/// curve and `source` names the world obstacle behind an ST obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StRow {
    pub kind: String,
    pub id: usize,
    pub source: Option<usize>,
    pub t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub t: f64,
    pub s: f64,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCsvRow {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub run: usize,
    pub prediction_ms: f64,
    pub path_ms: f64,
    pub speed_ms: f64,
    pub total_ms: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes a CSV whose header is known even when there are no rows.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    if !rows.is_empty() {
        return write_csv(path, rows);
    }
    fs::write(path, format!("{}\n", header.join(","))).map_err(|e| CliError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| CliError::io(path, e))
}

/// Reads `path` if it exists.
pub fn read_optional<T: DeserializeOwned>(path: &Path) -> Result<Option<Vec<T>>, CliError> {
    if path.exists() {
        read_csv(path).map(Some)
    } else {
        Ok(None)
    }
}
