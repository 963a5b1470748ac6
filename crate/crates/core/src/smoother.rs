//! Gradient-descent refinement of a waypoint polyline against obstacle,
//! curvature and smoothness penalties.

use thiserror::Error;

use crate::geometry::{Pose, Vec2, WorldMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error("path needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("segment ending at point {0} is degenerate (length below 1e-9)")]
    DegenerateSegment(usize),
    #[error("invalid smoother configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub w_obs: f64,
    pub w_cur: f64,
    pub w_smo: f64,
    /// Clearance below which the obstacle term is active [m].
    pub d_max: f64,
    pub kappa_max: f64,
    /// Per-term step sizes for the obstacle, curvature and smoothness gradients.
    pub steps: [f64; 3],
    pub max_iters: usize,
    pub converge_tol: f64,
}

impl SmootherConfig {
    /// Weights 0.1 / 0.1 / 0.2 with a common step of 0.25.
    pub fn with_limits(d_max: f64, kappa_max: f64) -> Self {
        Self {
            w_obs: 0.1,
            w_cur: 0.1,
            w_smo: 0.2,
            d_max,
            kappa_max,
            steps: [0.25; 3],
            max_iters: 500,
            converge_tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<(), SmoothError> {
        let positive = [
            ("w_obs", self.w_obs),
            ("w_cur", self.w_cur),
            ("w_smo", self.w_smo),
            ("d_max", self.d_max),
            ("kappa_max", self.kappa_max),
            ("steps[0]", self.steps[0]),
            ("steps[1]", self.steps[1]),
            ("steps[2]", self.steps[2]),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SmoothError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.max_iters == 0 {
            return Err(SmoothError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.converge_tol >= 0.0) {
            return Err(SmoothError::InvalidConfig("converge_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Waypoint polyline; `fixed[i]` excludes point `i` from optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolyline {
    pub points: Vec<Vec2>,
    pub fixed: Vec<bool>,
}

impl PathPolyline {
    /// Polyline with only the endpoints fixed.
    pub fn new(points: Vec<Vec2>) -> Result<Self, SmoothError> {
        let n = points.len();
        let mut fixed = vec![false; n];
        if let Some(f) = fixed.first_mut() {
            *f = true;
        }
        if let Some(l) = fixed.last_mut() {
            *l = true;
        }
        let path = Self { points, fixed };
        path.validate()?;
        Ok(path)
    }

    pub fn from_poses(poses: &[Pose]) -> Result<Self, SmoothError> {
        Self::new(poses.iter().map(|p| p.position()).collect())
    }

    pub fn validate(&self) -> Result<(), SmoothError> {
        if self.points.len() < 3 {
            return Err(SmoothError::TooFewPoints(self.points.len()));
        }
        for i in 1..self.points.len() {
            if (self.points[i] - self.points[i - 1]).norm() <= 1e-9 {
                return Err(SmoothError::DegenerateSegment(i));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Cumulative arc length at each point, starting at zero.
    pub fn stations(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += (w[1] - w[0]).norm();
            out.push(acc);
        }
        out
    }

    fn locate(&self, stations: &[f64], s: f64) -> (usize, f64) {
        let last = self.points.len() - 2;
        let k = match stations.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        };
        (k, s - stations[k])
    }

    /// Point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let stations = self.stations();
        let s = s.clamp(0.0, *stations.last().unwrap());
        let (k, off) = self.locate(&stations, s);
        let e = self.points[k + 1] - self.points[k];
        self.points[k] + e * (off / e.norm())
    }

    /// Heading of the segment containing arc length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let stations = self.stations();
        let s = s.clamp(0.0, *stations.last().unwrap());
        let (k, _) = self.locate(&stations, s);
        let e = self.points[k + 1] - self.points[k];
        e.y.atan2(e.x)
    }

    /// Discrete curvature `dphi_i / |x_i - x_{i-1}|` at each interior point.
    pub fn curvatures(&self) -> Vec<f64> {
        (1..self.points.len() - 1)
            .map(|i| {
                let u = self.points[i] - self.points[i - 1];
                let w = self.points[i + 1] - self.points[i];
                turn_angle(u, w).abs() / u.norm()
            })
            .collect()
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvatures().into_iter().fold(0.0, f64::max)
    }

    /// Smallest static clearance over the points.
    pub fn min_clearance(&self, map: &WorldMap) -> f64 {
        self.points.iter().map(|p| map.static_clearance(*p).distance).fold(f64::INFINITY, f64::min)
    }
}

/// Signed angle from `u` to `w`, via atan2 of cross and dot products.
fn turn_angle(u: Vec2, w: Vec2) -> f64 {
    (u.x * w.y - u.y * w.x).atan2(u.dot(&w))
}

/// Unweighted objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub obs: f64,
    pub cur: f64,
    pub smo: f64,
}

impl ObjectiveTerms {
    pub fn weighted(&self, cfg: &SmootherConfig) -> f64 {
        cfg.w_obs * self.obs + cfg.w_cur * self.cur + cfg.w_smo * self.smo
    }
}

/// Per-point gradients of each unweighted term; fixed points carry zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGradients {
    pub obs: Vec<Vec2>,
    pub cur: Vec<Vec2>,
    pub smo: Vec<Vec2>,
}

pub fn objective_terms(path: &PathPolyline, map: &WorldMap, cfg: &SmootherConfig) -> Result<ObjectiveTerms, SmoothError> {
    path.validate()?;
    let pts = &path.points;
    let n = pts.len();
    let mut terms = ObjectiveTerms::default();
    for p in pts {
        let d = map.static_clearance(*p).distance;
        if d < cfg.d_max {
            terms.obs += (d - cfg.d_max).powi(2);
        }
    }
    for i in 1..n - 1 {
        let u = pts[i] - pts[i - 1];
        let w = pts[i + 1] - pts[i];
        let kappa = turn_angle(u, w).abs() / u.norm();
        if kappa > cfg.kappa_max {
            terms.cur += (kappa - cfg.kappa_max).powi(2);
        }
        terms.smo += (w - u).norm_squared();
    }
    Ok(terms)
}

pub fn term_gradients(path: &PathPolyline, map: &WorldMap, cfg: &SmootherConfig) -> Result<TermGradients, SmoothError> {
    path.validate()?;
    let pts = &path.points;
    let n = pts.len();
    let mut g = TermGradients { obs: vec![Vec2::zeros(); n], cur: vec![Vec2::zeros(); n], smo: vec![Vec2::zeros(); n] };

    for (i, p) in pts.iter().enumerate() {
        let c = map.static_clearance(*p);
        if c.distance < cfg.d_max {
            if let Some(o) = c.nearest {
                let away = p - o;
                let len = away.norm();
                if len > 0.0 {
                    // gradient of the signed distance points away from the obstacle
                    let dir = if c.distance >= 0.0 { away / len } else { -away / len };
                    g.obs[i] += 2.0 * (c.distance - cfg.d_max) * dir;
                }
            }
        }
    }

    for i in 1..n - 1 {
        let u = pts[i] - pts[i - 1];
        let w = pts[i + 1] - pts[i];
        let phi = turn_angle(u, w);
        let ulen = u.norm();
        let kappa = phi.abs() / ulen;
        if kappa > cfg.kappa_max {
            let sign = phi.signum();
            let dphi_du = Vec2::new(u.y, -u.x) / u.norm_squared();
            let dphi_dw = Vec2::new(-w.y, w.x) / w.norm_squared();
            let dk_du = sign * dphi_du / ulen - phi.abs() * u / (ulen * ulen * ulen);
            let dk_dw = sign * dphi_dw / ulen;
            let f = 2.0 * (kappa - cfg.kappa_max);
            g.cur[i - 1] -= f * dk_du;
            g.cur[i] += f * (dk_du - dk_dw);
            g.cur[i + 1] += f * dk_dw;
        }
        let r = 2.0 * (w - u);
        g.smo[i - 1] += r;
        g.smo[i] -= 2.0 * r;
        g.smo[i + 1] += r;
    }

    for (i, fixed) in path.fixed.iter().enumerate() {
        if *fixed {
            g.obs[i] = Vec2::zeros();
            g.cur[i] = Vec2::zeros();
            g.smo[i] = Vec2::zeros();
        }
    }
    Ok(g)
}

/// Gradient of the weighted objective `w_obs*J_obs + w_cur*J_cur + w_smo*J_smo`.
pub fn gradient(path: &PathPolyline, map: &WorldMap, cfg: &SmootherConfig) -> Result<Vec<Vec2>, SmoothError> {
    let g = term_gradients(path, map, cfg)?;
    Ok((0..path.points.len())
        .map(|i| cfg.w_obs * g.obs[i] + cfg.w_cur * g.cur[i] + cfg.w_smo * g.smo[i])
        .collect())
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub terms: ObjectiveTerms,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothResult {
    pub path: PathPolyline,
    /// Accepted steps that moved at least one point.
    pub iterations: usize,
    /// Objective after every accepted step, starting with the input.
    pub trace: Vec<TraceRow>,
}

/// Runs per-term-step gradient descent with backtracking.
///
/// Each step moves free points by `-(a1 w_obs dJ_obs + a2 w_cur dJ_cur + a3 w_smo dJ_smo)`.
/// A step that raises the weighted objective, creates a degenerate segment or
/// lowers the minimum static clearance below `min(initial, 0)` is rejected and
/// all step sizes halve; they return to their configured values after every
/// accepted step.
pub fn smooth(path: &PathPolyline, map: &WorldMap, cfg: &SmootherConfig) -> Result<SmoothResult, SmoothError> {
    cfg.validate()?;
    path.validate()?;
    let clearance_floor = path.min_clearance(map).min(0.0);
    let mut current = path.clone();
    let mut terms = objective_terms(&current, map, cfg)?;
    let mut total = terms.weighted(cfg);
    let mut trace = vec![TraceRow { iteration: 0, terms, total }];
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        let g = term_gradients(&current, map, cfg)?;
        let mut scale = 1.0;
        let mut accepted = None;
        while scale > 1e-12 {
            let a = cfg.steps.map(|s| s * scale);
            let mut cand = current.clone();
            for i in 0..cand.points.len() {
                if !cand.fixed[i] {
                    cand.points[i] -= a[0] * cfg.w_obs * g.obs[i] + a[1] * cfg.w_cur * g.cur[i] + a[2] * cfg.w_smo * g.smo[i];
                }
            }
            if cand.validate().is_ok() {
                let t = objective_terms(&cand, map, cfg)?;
                let tot = t.weighted(cfg);
                if tot <= total && cand.min_clearance(map) >= clearance_floor {
                    accepted = Some((cand, t, tot));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((cand, t, tot)) = accepted else { break };
        let change = total - tot;
        let moved = cand.points != current.points;
        current = cand;
        terms = t;
        total = tot;
        if moved {
            iterations += 1;
            trace.push(TraceRow { iteration: iter, terms, total });
        }
        if change.abs() < cfg.converge_tol {
            break;
        }
    }
    Ok(SmoothResult { path: current, iterations, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Obstacle;

    fn cfg() -> SmootherConfig {
        SmootherConfig::with_limits(1.0, 1e6)
    }

    fn poly(pts: &[(f64, f64)]) -> PathPolyline {
        PathPolyline::new(pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn straight_path_has_zero_terms_and_gradient() {
        let map = WorldMap::empty(10.0, 10.0);
        let p = poly(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let t = objective_terms(&p, &map, &cfg()).unwrap();
        assert_eq!(t, ObjectiveTerms::default());
        assert!(gradient(&p, &map, &cfg()).unwrap().iter().all(|g| g.norm() == 0.0));
        let res = smooth(&p, &map, &cfg()).unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.path, p);
    }

    #[test]
    fn smoothness_term_direct_formula() {
        let map = WorldMap::empty(10.0, 10.0);
        let t = objective_terms(&poly(&[(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)]), &map, &cfg()).unwrap();
        assert!((t.smo - 1.0).abs() < 1e-15);
        assert_eq!(t.cur, 0.0);
    }

    #[test]
    fn degenerate_and_short_paths_are_rejected() {
        assert!(matches!(
            PathPolyline::new(vec![Vec2::zeros(), Vec2::zeros(), Vec2::new(1.0, 0.0)]),
            Err(SmoothError::DegenerateSegment(1))
        ));
        assert!(matches!(PathPolyline::new(vec![Vec2::zeros(), Vec2::new(1.0, 0.0)]), Err(SmoothError::TooFewPoints(2))));
    }

    #[test]
    fn obstacle_gradient_pushes_away() {
        let sq = vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(2.0, 2.0), Vec2::new(0.0, 2.0)];
        let map = WorldMap::new(10.0, 10.0, vec![Obstacle::new_static(0, sq, 0.0).unwrap()]);
        let c = cfg();
        let p = poly(&[(-3.0, 2.5), (1.0, 2.0 + 0.5 * c.d_max), (5.0, 2.5)]);
        let g = term_gradients(&p, &map, &c).unwrap();
        let away = p.points[1] - Vec2::new(1.0, 2.0);
        // parallel to x - o, pointing into the obstacle, so the descent step moves away
        assert!((g.obs[1].x * away.y - g.obs[1].y * away.x).abs() < 1e-12);
        assert!(g.obs[1].dot(&away) < 0.0);
    }

    #[test]
    fn zigzag_converges_monotonically() {
        let map = WorldMap::empty(10.0, 10.0);
        let mut c = cfg();
        c.w_obs = 1e-9;
        c.w_cur = 1e-9;
        let p = poly(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 0.0)]);
        let res = smooth(&p, &map, &c).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1].terms.smo <= w[0].terms.smo + 1e-15);
        }
        let before = objective_terms(&p, &map, &c).unwrap().smo;
        let after = objective_terms(&res.path, &map, &c).unwrap().smo;
        assert!(after < 1e-3 * before, "{before} -> {after}");
        assert_eq!(res.path.points[0], p.points[0]);
        assert_eq!(res.path.points[4], p.points[4]);
        for q in &res.path.points[1..4] {
            assert!(q.y.abs() < 0.05, "{q:?}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.max_iters = 0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.w_obs = -1.0;
        assert!(c.validate().is_err());
    }
}
