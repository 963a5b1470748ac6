//! Station–time planning: obstacle projection, lattice search, corridors.
//!
//! Moving obstacles are mapped onto the `(t, s)` plane of a fixed path as
//! parallelograms with vertical time edges. A second-order dynamic program over
//! a uniform lattice finds a reference station profile, and the free space
//! around that profile is cut into one trapezoid per time segment.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Obstacle, Vec2};
use crate::smoother::PathPolyline;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StError {
    #[error("invalid ST grid: {0}")]
    InvalidGrid(String),
    #[error("start or terminal lattice node lies inside an obstacle")]
    BlockedEndpoint,
    #[error("no feasible station profile reaches the terminal node")]
    NoFeasibleProfile,
    #[error("invalid segment boundaries: {0}")]
    InvalidSegments(String),
    #[error("no linear bounds separate the profile from obstacles in segment {segment}")]
    EmptyCorridor { segment: usize },
}

/// Region `{(t, s) : t_in <= t <= t_out, c_lo + slope*t <= s <= c_hi + slope*t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct STObstacle {
    pub source: usize,
    pub t_in: f64,
    pub t_out: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    /// Along-path drift `ds/dt` of the slanted edges.
    pub slope: f64,
}

impl STObstacle {
    pub fn new(source: usize, t_in: f64, t_out: f64, c_lo: f64, c_hi: f64, slope: f64) -> Self {
        Self { source, t_in, t_out, c_lo, c_hi, slope }
    }

    /// Axis-aligned rectangle in the `(t, s)` plane.
    pub fn rectangle(source: usize, t_in: f64, t_out: f64, s_lo: f64, s_hi: f64) -> Self {
        Self::new(source, t_in, t_out, s_lo, s_hi, 0.0)
    }

    pub fn lower_at(&self, t: f64) -> f64 {
        self.c_lo + self.slope * t
    }

    pub fn upper_at(&self, t: f64) -> f64 {
        self.c_hi + self.slope * t
    }

    /// Corners `(t, s)` counter-clockwise from `(t_in, lower)`.
    pub fn vertices(&self) -> [(f64, f64); 4] {
        [
            (self.t_in, self.lower_at(self.t_in)),
            (self.t_out, self.lower_at(self.t_out)),
            (self.t_out, self.upper_at(self.t_out)),
            (self.t_in, self.upper_at(self.t_in)),
        ]
    }

    /// Closed membership test.
    pub fn contains(&self, t: f64, s: f64) -> bool {
        t >= self.t_in && t <= self.t_out && s >= self.lower_at(t) && s <= self.upper_at(t)
    }

    /// Whether the closed segment between two `(t, s)` points touches the region.
    ///
    /// In sheared coordinates `c = s - slope*t` the region is a box, so this is
    /// a Liang–Barsky clip.
    pub fn intersects_segment(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let (t0, c0) = (a.0, a.1 - self.slope * a.0);
        let (dt, dc) = (b.0 - a.0, (b.1 - self.slope * b.0) - c0);
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for (p, q) in [
            (-dt, t0 - self.t_in),
            (dt, self.t_out - t0),
            (-dc, c0 - self.c_lo),
            (dc, self.c_hi - c0),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    lo = lo.max(r);
                } else {
                    hi = hi.min(r);
                }
                if lo > hi {
                    return false;
                }
            }
        }
        true
    }
}

/// Clips a convex polygon in `(t, s)` by `a*t + b*s <= c`.
fn clip(poly: &[(f64, f64)], a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let fp = a * p.0 + b * p.1 - c;
        let fq = a * q.0 + b * q.1 - c;
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let r = fp / (fp - fq);
            out.push((p.0 + r * (q.0 - p.0), p.1 + r * (q.1 - p.1)));
        }
    }
    out
}

/// Exact `(t, s)` occupancy of one straight path piece by a moving polygon.
fn piece_occupancy(
    ob: &Obstacle,
    start: Vec2,
    dir: Vec2,
    s0: f64,
    s1: f64,
    horizon: f64,
) -> Vec<(f64, f64)> {
    let (normals, offsets) = ob.halfspaces_at(0.0);
    let v = ob.velocity();
    let mut poly = vec![(0.0, s0), (horizon, s0), (horizon, s1), (0.0, s1)];
    for (n, b) in normals.iter().zip(&offsets) {
        let ne = n.dot(&dir);
        poly = clip(&poly, -n.dot(&v), ne, b - n.dot(&start) + ne * s0);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Area slack tolerated before an enclosure is split in time.
const ENCLOSURE_SLACK: f64 = 1.1;
/// Shortest time slice produced by splitting [s].
const MIN_SLICE: f64 = 0.05;

fn t_extent<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> (f64, f64) {
    pts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(t, _)| (lo.min(t), hi.max(t)))
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].0 * poly[(i + 1) % n].1 - poly[(i + 1) % n].0 * poly[i].1).sum::<f64>().abs() / 2.0
}

/// Smallest parallelogram (vertical time edges, slope from `slopes`) around `pts`.
fn best_parallelogram(source: usize, pts: &[(f64, f64)], slopes: &[f64]) -> (f64, STObstacle) {
    let mut best: Option<(f64, STObstacle)> = None;
    for &u in slopes {
        let (t_in, t_out) = t_extent(pts.iter());
        let (c_lo, c_hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(t, s)| (lo.min(s - u * t), hi.max(s - u * t)));
        let area = (t_out - t_in) * (c_hi - c_lo);
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            best = Some((area, STObstacle::new(source, t_in, t_out, c_lo, c_hi, u)));
        }
    }
    best.expect("at least one slope")
}

/// Encloses the part of a run of piece occupancies inside `[ta, tb]`, halving
/// the window while the enclosure wastes more than the tolerated slack.
fn enclose(source: usize, run: &[(f64, Vec<(f64, f64)>)], ta: f64, tb: f64, out: &mut Vec<STObstacle>) {
    let parts: Vec<Vec<(f64, f64)>> = run
        .iter()
        .map(|(_, p)| clip(&clip(p, -1.0, 0.0, -ta), 1.0, 0.0, tb))
        .filter(|p| p.len() >= 3)
        .collect();
    if parts.is_empty() {
        return;
    }
    let pts: Vec<(f64, f64)> = parts.iter().flatten().copied().collect();
    let mut slopes: Vec<f64> = run.iter().map(|(u, _)| *u).collect();
    slopes.push(0.0);
    let (area, para) = best_parallelogram(source, &pts, &slopes);
    let exact: f64 = parts.iter().map(|p| polygon_area(p)).sum();
    let (t_in, t_out) = (para.t_in, para.t_out);
    if area <= ENCLOSURE_SLACK * exact || t_out - t_in <= 2.0 * MIN_SLICE {
        out.push(para);
    } else {
        let mid = 0.5 * (t_in + t_out);
        enclose(source, run, t_in, mid, out);
        enclose(source, run, mid, t_out, out);
    }
}

/// Projects moving obstacles onto the station–time plane of `path`.
///
/// Each obstacle is inflated by `robot_width / 2` on top of its own margin.
/// Every maximal run of consecutive path pieces the obstacle touches is
/// enclosed in parallelograms whose slopes are chosen among the along-piece
/// obstacle speeds (and zero) to minimize area; where one parallelogram would
/// overshoot the exact occupancy by more than 10 %, the time window is bisected.
pub fn project_obstacles(path: &PathPolyline, obstacles: &[Obstacle], horizon: f64, robot_width: f64) -> Vec<STObstacle> {
    let stations = path.stations();
    let mut out = Vec::new();
    for ob in obstacles {
        let grown = match ob.with_inflation(ob.inflation() + 0.5 * robot_width) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let mut run: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
        let flush = |run: &mut Vec<(f64, Vec<(f64, f64)>)>, out: &mut Vec<STObstacle>| {
            if !run.is_empty() {
                let (t_in, t_out) = t_extent(run.iter().flat_map(|(_, p)| p.iter()));
                enclose(ob.id, run, t_in, t_out, out);
                run.clear();
            }
        };
        for k in 0..path.points.len() - 1 {
            let e = path.points[k + 1] - path.points[k];
            let dir = e / e.norm();
            let poly = piece_occupancy(&grown, path.points[k], dir, stations[k], stations[k + 1], horizon);
            if poly.is_empty() {
                flush(&mut run, &mut out);
            } else {
                run.push((ob.velocity().dot(&dir), poly));
            }
        }
        flush(&mut run, &mut out);
    }
    out
}

/// Uniform `(t, s)` lattice with `nt` time steps and `ns` station steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct STGrid {
    pub horizon: f64,
    pub s_max: f64,
    pub nt: usize,
    pub ns: usize,
    pub dt: f64,
    pub ds: f64,
}

impl STGrid {
    pub fn new(horizon: f64, s_max: f64, nt: usize, ns: usize) -> Result<Self, StError> {
        if !(horizon > 0.0 && horizon.is_finite()) || !(s_max > 0.0 && s_max.is_finite()) {
            return Err(StError::InvalidGrid(format!("horizon {horizon} and length {s_max} must be positive")));
        }
        if nt < 2 || ns < 2 {
            return Err(StError::InvalidGrid(format!("lattice {nt}x{ns} must be at least 2x2")));
        }
        Ok(Self { horizon, s_max, nt, ns, dt: horizon / nt as f64, ds: s_max / ns as f64 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpConfig {
    /// Weight on squared deviation from the constant-speed line.
    pub w_ref: f64,
    /// Weight on squared lattice acceleration.
    pub w_acc: f64,
    /// Weight on squared margin violation near obstacles.
    pub w_clear: f64,
    pub clear_margin: f64,
    pub v_max: f64,
    /// Edges whose lattice acceleration exceeds this magnitude are infeasible.
    pub a_max: f64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self { w_ref: 1.0, w_acc: 10.0, w_clear: 5.0, clear_margin: 0.5, v_max: 1.0, a_max: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    /// Station at each lattice time `i * dt`, `i = 0..=nt`.
    pub stations: Vec<f64>,
    pub dt: f64,
    pub total_cost: f64,
}

impl ReferenceProfile {
    pub fn horizon(&self) -> f64 {
        self.dt * (self.stations.len() - 1) as f64
    }

    pub fn s_max(&self) -> f64 {
        *self.stations.last().unwrap()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.stations.len()).map(|i| i as f64 * self.dt).collect()
    }

    /// Piecewise-linear interpolation, clamped to the horizon.
    pub fn station_at(&self, t: f64) -> f64 {
        let last = self.stations.len() - 1;
        let x = (t / self.dt).clamp(0.0, last as f64);
        let i = (x.floor() as usize).min(last - 1);
        let r = x - i as f64;
        self.stations[i] + r * (self.stations[i + 1] - self.stations[i])
    }

    /// Per-step speeds `(s_i - s_{i-1}) / dt`.
    pub fn speeds(&self) -> Vec<f64> {
        self.stations.windows(2).map(|w| (w[1] - w[0]) / self.dt).collect()
    }
}

/// Exact second-order lattice search over paths `j_0 = 0, ..., j_nt = ns` with
/// increments in `0..=kmax`.
///
/// The state is the pair (node, incoming increment), so an edge cost may depend
/// on the previous step: `edge(i, j_before, j_from, j_to)` prices the step into
/// time index `i`, with `j_before = None` on the first step. A path's cost is
/// accumulated left to right as `((acc + node(i, j_i)) + edge_i)` starting
/// from `node(0, 0)`. Returns the lattice rows and the total cost.
pub fn dp_search_with<N, E>(nt: usize, ns: usize, kmax: usize, node: N, edge: E) -> Option<(Vec<usize>, f64)>
where
    N: Fn(usize, usize) -> f64,
    E: Fn(usize, Option<usize>, usize, usize) -> f64,
{
    if nt == 0 {
        return None;
    }
    let kmax = kmax.min(ns);
    let w = kmax + 1;
    let idx = |j: usize, d: usize| j * w + d;
    let mut cost = vec![vec![f64::INFINITY; (ns + 1) * w]; nt + 1];
    let mut back = vec![vec![usize::MAX; (ns + 1) * w]; nt + 1];
    let start = node(0, 0);
    if !start.is_finite() {
        return None;
    }
    for j in 0..=kmax {
        let c = start + node(1, j) + edge(1, None, 0, j);
        if c.is_finite() {
            cost[1][idx(j, j)] = c;
        }
    }
    for i in 2..=nt {
        let (prev, cur) = cost.split_at_mut(i);
        let prev = &prev[i - 1];
        let cur = &mut cur[0];
        for j in 0..=ns {
            if i == nt && j != ns {
                continue;
            }
            let n = node(i, j);
            if !n.is_finite() {
                continue;
            }
            for d in 0..=kmax.min(j) {
                let jf = j - d;
                let mut best = f64::INFINITY;
                let mut arg = usize::MAX;
                for dp in 0..=kmax.min(jf) {
                    let cp = prev[idx(jf, dp)];
                    if !cp.is_finite() {
                        continue;
                    }
                    let c = cp + n + edge(i, Some(jf - dp), jf, j);
                    if c < best {
                        best = c;
                        arg = dp;
                    }
                }
                cur[idx(j, d)] = best;
                back[i][idx(j, d)] = arg;
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut arg = usize::MAX;
    for d in 0..=kmax {
        let c = cost[nt][idx(ns, d)];
        if c < best {
            best = c;
            arg = d;
        }
    }
    if !best.is_finite() {
        return None;
    }
    let mut rows = vec![0; nt + 1];
    let (mut j, mut d) = (ns, arg);
    for i in (1..=nt).rev() {
        rows[i] = j;
        let dp = back[i][idx(j, d)];
        j -= d;
        d = dp;
    }
    rows[0] = j;
    debug_assert_eq!(rows[0], 0);
    Some((rows, best))
}

/// Reference profile from `(0, 0)` to `(T, s_max)` on the lattice.
///
/// Node cost: `w_ref (s - s_max t / T)^2`, infinite inside an obstacle, plus
/// `w_clear (margin - d)^2` for every obstacle closer than `margin` in station.
/// Edge cost: infinite when the straight edge touches an obstacle, otherwise
/// `w_acc ((v - v_prev) / dt)^2` with `v_prev = v0` on the first step.
pub fn dp_search(grid: &STGrid, st_obs: &[STObstacle], cfg: &DpConfig, v0: f64) -> Result<ReferenceProfile, StError> {
    let (dt, ds) = (grid.dt, grid.ds);
    let at = |i: usize, j: usize| (i as f64 * dt, j as f64 * ds);
    if st_obs.iter().any(|o| o.contains(0.0, 0.0) || o.contains(grid.horizon, grid.s_max)) {
        return Err(StError::BlockedEndpoint);
    }
    let kmax = ((cfg.v_max * dt / ds) + 1e-9).floor().max(0.0) as usize;
    let node = |i: usize, j: usize| {
        let (t, s) = at(i, j);
        let dev = s - grid.s_max * t / grid.horizon;
        let mut c = cfg.w_ref * dev * dev;
        for o in st_obs {
            if o.contains(t, s) {
                return f64::INFINITY;
            }
            if t >= o.t_in && t <= o.t_out {
                let d = (o.lower_at(t) - s).max(s - o.upper_at(t));
                if d < cfg.clear_margin {
                    c += cfg.w_clear * (cfg.clear_margin - d).powi(2);
                }
            }
        }
        c
    };
    let edge = |i: usize, before: Option<usize>, from: usize, to: usize| {
        let a = at(i - 1, from);
        let b = at(i, to);
        if st_obs.iter().any(|o| o.intersects_segment(a, b)) {
            return f64::INFINITY;
        }
        let v = (to - from) as f64 * ds / dt;
        let v_prev = match before {
            Some(k) => (from - k) as f64 * ds / dt,
            None => v0,
        };
        let acc = (v - v_prev) / dt;
        if acc.abs() > cfg.a_max + 1e-9 {
            return f64::INFINITY;
        }
        cfg.w_acc * acc * acc
    };
    let (rows, total_cost) = dp_search_with(grid.nt, grid.ns, kmax, node, edge).ok_or(StError::NoFeasibleProfile)?;
    let stations = rows.iter().map(|&j| if j == grid.ns { grid.s_max } else { j as f64 * ds }).collect();
    Ok(ReferenceProfile { stations, dt, total_cost })
}

/// One trapezoid: `lower(t) = q0 + q1 (t - t_start)`, `upper(t) = p0 + p1 (t - t_start)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorridorSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub q0: f64,
    pub q1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl CorridorSegment {
    pub fn lower_at(&self, t: f64) -> f64 {
        self.q0 + self.q1 * (t - self.t_start)
    }

    pub fn upper_at(&self, t: f64) -> f64 {
        self.p0 + self.p1 * (t - self.t_start)
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub segments: Vec<CorridorSegment>,
}

impl Corridor {
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.t_start).collect();
        if let Some(last) = self.segments.last() {
            b.push(last.t_end);
        }
        b
    }

    /// Index of the segment containing `t` (the later one at a shared boundary).
    pub fn segment_at(&self, t: f64) -> Option<usize> {
        let n = self.segments.len();
        (0..n).find(|&j| t >= self.segments[j].t_start && (t < self.segments[j].t_end || (j + 1 == n && t <= self.segments[j].t_end)))
    }
}

/// `m` equal time segments over `[0, horizon]`.
pub fn uniform_segments(horizon: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|j| if j == m { horizon } else { horizon * j as f64 / m as f64 }).collect()
}

/// Constraint `alpha * x_a + beta * x_b <= rhs` on a line's end values.
#[derive(Clone, Copy)]
struct EndRow {
    alpha: f64,
    beta: f64,
    rhs: f64,
}

/// Maximizes `x_a + x_b` over the rows by vertex enumeration.
fn best_line(rows: &[EndRow]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, (f64, f64))> = None;
    for i in 0..rows.len() {
        for k in i + 1..rows.len() {
            let (r1, r2) = (rows[i], rows[k]);
            let det = r1.alpha * r2.beta - r1.beta * r2.alpha;
            if det.abs() < 1e-12 {
                continue;
            }
            let xa = (r1.rhs * r2.beta - r1.beta * r2.rhs) / det;
            let xb = (r1.alpha * r2.rhs - r1.rhs * r2.alpha) / det;
            let ok = rows.iter().all(|r| r.alpha * xa + r.beta * xb <= r.rhs + 1e-9 * (1.0 + r.rhs.abs()));
            if ok {
                let val = xa + xb;
                if best.is_none_or(|(b, _)| val > b + 1e-12) {
                    best = Some((val, (xa, xb)));
                }
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Gap kept between corridor bounds and obstacle edges, so an optimized profile
/// resting on a bound does not touch the obstacle.
pub const CORRIDOR_BUFFER: f64 = 1e-3;

/// Trapezoidal corridors around `profile`, one per consecutive pair of `boundaries`.
///
/// Each bound is the line maximizing the corridor area subject to containing
/// the profile at the lattice times in the segment (and at its ends), staying
/// at least [`CORRIDOR_BUFFER`] clear of every obstacle on its side of the
/// profile over the time overlap, and staying within `[0, s_max]`.
pub fn build_corridors(profile: &ReferenceProfile, st_obs: &[STObstacle], boundaries: &[f64]) -> Result<Corridor, StError> {
    let horizon = profile.horizon();
    let s_max = profile.s_max();
    if boundaries.len() < 2 {
        return Err(StError::InvalidSegments("need at least two boundaries".into()));
    }
    if (boundaries[0]).abs() > 1e-9 || (boundaries[boundaries.len() - 1] - horizon).abs() > 1e-9 {
        return Err(StError::InvalidSegments(format!("boundaries must span [0, {horizon}]")));
    }
    if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(StError::InvalidSegments("boundaries must increase strictly".into()));
    }
    let times = profile.times();
    let mut segments = Vec::with_capacity(boundaries.len() - 1);
    for (j, w) in boundaries.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        let lam = |t: f64| (t - a) / h;
        let mut samples = vec![a];
        samples.extend(times.iter().copied().filter(|&t| t > a && t < b));
        samples.push(b);

        // rows for the upper line (x = end values) and the negated lower line
        let mut upper = vec![
            EndRow { alpha: 1.0, beta: 0.0, rhs: s_max },
            EndRow { alpha: 0.0, beta: 1.0, rhs: s_max },
        ];
        let mut lower = vec![
            EndRow { alpha: 1.0, beta: 0.0, rhs: 0.0 },
            EndRow { alpha: 0.0, beta: 1.0, rhs: 0.0 },
        ];
        for &t in &samples {
            let l = lam(t);
            let s = profile.station_at(t);
            upper.push(EndRow { alpha: -(1.0 - l), beta: -l, rhs: -s });
            lower.push(EndRow { alpha: -(1.0 - l), beta: -l, rhs: s });
        }
        for o in st_obs {
            let (lo, hi) = (o.t_in.max(a), o.t_out.min(b));
            if lo > hi {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let s = profile.station_at(mid);
            let above = s < o.lower_at(mid);
            if !above && !(s > o.upper_at(mid)) {
                return Err(StError::EmptyCorridor { segment: j });
            }
            for t in [lo, hi] {
                let l = lam(t);
                // Keep a sliver of clearance unless the reference itself is closer.
                let r = profile.station_at(t);
                if above {
                    let bound = (o.lower_at(t) - CORRIDOR_BUFFER).max(r.min(o.lower_at(t)));
                    upper.push(EndRow { alpha: 1.0 - l, beta: l, rhs: bound });
                } else {
                    let bound = (o.upper_at(t) + CORRIDOR_BUFFER).min(r.max(o.upper_at(t)));
                    lower.push(EndRow { alpha: 1.0 - l, beta: l, rhs: -bound });
                }
            }
        }
        let (ua, ub) = best_line(&upper).ok_or(StError::EmptyCorridor { segment: j })?;
        let (la, lb) = best_line(&lower).map(|(x, y)| (-x, -y)).ok_or(StError::EmptyCorridor { segment: j })?;
        if ua - la <= 1e-9 || ub - lb <= 1e-9 {
            return Err(StError::EmptyCorridor { segment: j });
        }
        segments.push(CorridorSegment { t_start: a, t_end: b, q0: la, q1: (lb - la) / h, p0: ua, p1: (ub - ua) / h });
    }
    Ok(Corridor { segments })
}

/// Corridors starting from `boundaries`, bisecting any segment that admits no
/// separating bounds until it succeeds or a segment would get shorter than
/// `min_duration`.
pub fn build_corridors_refined(
    profile: &ReferenceProfile,
    st_obs: &[STObstacle],
    boundaries: &[f64],
    min_duration: f64,
) -> Result<Corridor, StError> {
    let mut b = boundaries.to_vec();
    loop {
        match build_corridors(profile, st_obs, &b) {
            Err(StError::EmptyCorridor { segment }) if b[segment + 1] - b[segment] >= 2.0 * min_duration => {
                b.insert(segment + 1, 0.5 * (b[segment] + b[segment + 1]));
            }
            other => return other,
        }
    }
}

/// One row of the ST-graph snapshot export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StCsvRow {
    /// `obstacle`, `profile`, `lower` or `upper`.
    pub kind: &'static str,
    /// Obstacle id or corridor segment index; zero for the profile.
    pub id: usize,
    pub t: f64,
    pub s: f64,
}

/// Flattens obstacles (closed vertex loops), the profile and corridor bounds.
pub fn st_graph_rows(st_obs: &[STObstacle], profile: &ReferenceProfile, corridor: Option<&Corridor>) -> Vec<StCsvRow> {
    let mut rows = Vec::new();
    for o in st_obs {
        let v = o.vertices();
        for &(t, s) in v.iter().chain(std::iter::once(&v[0])) {
            rows.push(StCsvRow { kind: "obstacle", id: o.source, t, s });
        }
    }
    for (t, &s) in profile.times().into_iter().zip(&profile.stations) {
        rows.push(StCsvRow { kind: "profile", id: 0, t, s });
    }
    if let Some(c) = corridor {
        for (j, seg) in c.segments.iter().enumerate() {
            for t in [seg.t_start, seg.t_end] {
                rows.push(StCsvRow { kind: "lower", id: j, t, s: seg.lower_at(t) });
            }
            for t in [seg.t_start, seg.t_end] {
                rows.push(StCsvRow { kind: "upper", id: j, t, s: seg.upper_at(t) });
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_path(len: f64, n: usize) -> PathPolyline {
        PathPolyline::new((0..=n).map(|i| Vec2::new(len * i as f64 / n as f64, 0.0)).collect()).unwrap()
    }

    fn square(cx: f64, cy: f64, half: f64) -> Vec<Vec2> {
        vec![
            Vec2::new(cx - half, cy - half),
            Vec2::new(cx + half, cy - half),
            Vec2::new(cx + half, cy + half),
            Vec2::new(cx - half, cy + half),
        ]
    }

    #[test]
    fn perpendicular_crossing_is_rectangle() {
        let path = straight_path(10.0, 10);
        // square of half-width 0.5 centred at x=5 moving up through y=0 at 1 m/s
        let ob = Obstacle::new_dynamic(3, square(5.0, -3.0, 0.5), Vec2::new(0.0, 1.0), 0.0).unwrap();
        let st = project_obstacles(&path, &[ob], 10.0, 0.0);
        assert_eq!(st.len(), 1);
        let o = st[0];
        assert_eq!(o.source, 3);
        assert_eq!(o.slope, 0.0);
        assert!((o.t_in - 2.5).abs() < 1e-12 && (o.t_out - 3.5).abs() < 1e-12);
        assert!((o.c_lo - 4.5).abs() < 1e-12 && (o.c_hi - 5.5).abs() < 1e-12);
    }

    #[test]
    fn parallel_motion_shears() {
        let path = straight_path(20.0, 4);
        let ob = Obstacle::new_dynamic(0, square(2.0, 0.0, 0.5), Vec2::new(1.5, 0.0), 0.0).unwrap();
        let st = project_obstacles(&path, &[ob], 6.0, 0.0);
        assert_eq!(st.len(), 1);
        let o = st[0];
        assert!((o.slope - 1.5).abs() < 1e-12);
        assert!((o.lower_at(2.0) - 4.5).abs() < 1e-9 && (o.upper_at(2.0) - 5.5).abs() < 1e-9);
        assert!(o.t_in.abs() < 1e-12 && (o.t_out - 6.0).abs() < 1e-12);
    }

    #[test]
    fn far_obstacle_emits_nothing() {
        let path = straight_path(10.0, 5);
        let ob = Obstacle::new_dynamic(0, square(5.0, 5.0, 0.5), Vec2::new(1.0, 0.0), 0.0).unwrap();
        assert!(project_obstacles(&path, &[ob], 10.0, 1.0).is_empty());
    }

    #[test]
    fn robot_width_grows_occupancy() {
        let path = straight_path(10.0, 10);
        let ob = Obstacle::new_dynamic(0, square(5.0, -3.0, 0.5), Vec2::new(0.0, 1.0), 0.0).unwrap();
        let st = project_obstacles(&path, &[ob], 10.0, 1.0);
        // mitered square grows by exactly 0.5 on each side
        assert!((st[0].c_lo - 4.0).abs() < 1e-12 && (st[0].t_in - 2.0).abs() < 1e-12);
    }

    #[test]
    fn segment_intersection() {
        let o = STObstacle::new(0, 1.0, 2.0, 1.0, 2.0, 0.5);
        assert!(o.intersects_segment((0.0, 0.0), (3.0, 6.0)));
        assert!(!o.intersects_segment((0.0, 0.0), (3.0, 0.5)));
        assert!(o.intersects_segment((1.5, 2.0), (1.5, 2.0)));
        assert!(!o.intersects_segment((0.0, 5.0), (0.9, 5.0)));
    }

    #[test]
    fn free_profile_is_uniform() {
        let grid = STGrid::new(10.0, 6.0, 20, 60).unwrap();
        let cfg = DpConfig { v_max: 2.0, ..DpConfig::default() };
        let p = dp_search(&grid, &[], &cfg, 0.6).unwrap();
        for (t, s) in p.times().iter().zip(&p.stations) {
            assert!((s - 0.6 * t).abs() <= grid.ds + 1e-12);
        }
        assert_eq!(p.stations[0], 0.0);
        assert_eq!(*p.stations.last().unwrap(), 6.0);
    }

    #[test]
    fn profile_goes_around_blocker() {
        let grid = STGrid::new(10.0, 6.0, 20, 60).unwrap();
        let cfg = DpConfig { v_max: 2.0, ..DpConfig::default() };
        let block = STObstacle::rectangle(0, 4.0, 6.0, 2.5, 3.5);
        let p = dp_search(&grid, &[block], &cfg, 0.6).unwrap();
        let side: Vec<bool> = p
            .times()
            .iter()
            .zip(&p.stations)
            .filter(|(t, _)| **t >= 4.0 && **t <= 6.0)
            .map(|(_, s)| *s > 3.5)
            .collect();
        assert!(side.iter().all(|&x| x == side[0]));
        for w in p.stations.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn blocked_endpoint_rejected() {
        let grid = STGrid::new(10.0, 6.0, 10, 10).unwrap();
        let block = STObstacle::rectangle(0, 9.0, 10.0, 5.0, 7.0);
        assert_eq!(dp_search(&grid, &[block], &DpConfig::default(), 0.0), Err(StError::BlockedEndpoint));
    }

    #[test]
    fn unreachable_terminal() {
        let grid = STGrid::new(2.0, 10.0, 4, 10).unwrap();
        let cfg = DpConfig { v_max: 1.0, ..DpConfig::default() };
        assert_eq!(dp_search(&grid, &[], &cfg, 0.0), Err(StError::NoFeasibleProfile));
    }

    #[test]
    fn empty_corridor_is_full_band() {
        let grid = STGrid::new(10.0, 6.0, 20, 60).unwrap();
        let p = dp_search(&grid, &[], &DpConfig { v_max: 2.0, ..DpConfig::default() }, 0.6).unwrap();
        let c = build_corridors(&p, &[], &uniform_segments(10.0, 5)).unwrap();
        assert_eq!(c.segments.len(), 5);
        for seg in &c.segments {
            assert_eq!((seg.q0, seg.q1, seg.p0, seg.p1), (0.0, 0.0, 6.0, 0.0));
        }
    }

    #[test]
    fn lower_bound_clears_obstacle_below() {
        let grid = STGrid::new(10.0, 6.0, 20, 60).unwrap();
        let cfg = DpConfig { v_max: 2.0, ..DpConfig::default() };
        let o = STObstacle::new(0, 3.0, 7.0, 0.0, 1.0, 0.0);
        let p = dp_search(&grid, &[o], &cfg, 0.6).unwrap();
        let c = build_corridors(&p, &[o], &uniform_segments(10.0, 5)).unwrap();
        for seg in &c.segments {
            let (lo, hi) = (seg.t_start.max(3.0), seg.t_end.min(7.0));
            if lo <= hi {
                assert!(seg.lower_at(lo) >= 1.0 - 1e-9 && seg.lower_at(hi) >= 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn csv_rows_cover_everything() {
        let grid = STGrid::new(4.0, 2.0, 4, 4).unwrap();
        let p = dp_search(&grid, &[], &DpConfig::default(), 0.5).unwrap();
        let c = build_corridors(&p, &[], &uniform_segments(4.0, 2)).unwrap();
        let o = STObstacle::rectangle(7, 1.0, 2.0, 5.0, 6.0);
        let rows = st_graph_rows(&[o], &p, Some(&c));
        assert_eq!(rows.iter().filter(|r| r.kind == "obstacle").count(), 5);
        assert_eq!(rows.iter().filter(|r| r.kind == "profile").count(), 5);
        assert_eq!(rows.iter().filter(|r| r.kind == "upper").count(), 4);
    }
}
