use super::{GeometryError, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleKind {
    Static,
    Dynamic,
}

/// Convex polygonal obstacle translating at constant velocity.
///
/// The occupied set at time `t` is `{ z : G z <= b(t) }`, where each row of `G`
/// is an outward unit edge normal and `b(t)` shifts with the translation. The
/// inflation margin is applied by pushing every edge outward, so the inflated
/// shape is again a convex polygon (mitered at corners).
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub id: usize,
    pub kind: ObstacleKind,
    vertices: Vec<Vec2>,
    velocity: Vec2,
    inflation: f64,
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
    inflated: Vec<Vec2>,
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

impl Obstacle {
    /// Builds an obstacle from a convex polygon given at `t = 0`. Clockwise input is
    /// reordered to counter-clockwise.
    pub fn new(
        id: usize,
        kind: ObstacleKind,
        vertices: Vec<Vec2>,
        velocity: Vec2,
        inflation: f64,
    ) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!("obstacle {id}: need at least 3 vertices")));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite())
            || !velocity.x.is_finite()
            || !velocity.y.is_finite()
        {
            return Err(GeometryError::NonFinite("obstacle"));
        }
        if !(inflation >= 0.0) || !inflation.is_finite() {
            return Err(GeometryError::InvalidPolygon(format!("obstacle {id}: inflation must be >= 0")));
        }
        if kind == ObstacleKind::Static && velocity.norm() > 0.0 {
            return Err(GeometryError::InvalidPolygon(format!("obstacle {id}: static obstacle with velocity")));
        }
        let mut vertices = vertices;
        let n = vertices.len();
        let area2: f64 = (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n])).sum();
        if area2.abs() < 1e-12 {
            return Err(GeometryError::InvalidPolygon(format!("obstacle {id}: degenerate polygon")));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            let e = vertices[(i + 1) % n] - vertices[i];
            let len = e.norm();
            if len < 1e-12 {
                return Err(GeometryError::InvalidPolygon(format!("obstacle {id}: repeated vertex")));
            }
            let next = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            if cross(e, next) < -1e-12 * len * next.norm() {
                return Err(GeometryError::InvalidPolygon(format!("obstacle {id}: polygon is not convex")));
            }
            normals.push(Vec2::new(e.y, -e.x) / len);
        }
        let offsets = (0..n).map(|i| normals[i].dot(&vertices[i]) + inflation).collect();
        let inflated = (0..n)
            .map(|i| {
                let n_prev = normals[(i + n - 1) % n];
                let n_next = normals[i];
                vertices[i] + inflation * (n_prev + n_next) / (1.0 + n_prev.dot(&n_next))
            })
            .collect();
        Ok(Self { id, kind, vertices, velocity, inflation, normals, offsets, inflated })
    }

    pub fn new_static(id: usize, vertices: Vec<Vec2>, inflation: f64) -> Result<Self, GeometryError> {
        Self::new(id, ObstacleKind::Static, vertices, Vec2::zeros(), inflation)
    }

    pub fn new_dynamic(id: usize, vertices: Vec<Vec2>, velocity: Vec2, inflation: f64) -> Result<Self, GeometryError> {
        Self::new(id, ObstacleKind::Dynamic, vertices, velocity, inflation)
    }

    /// Un-inflated polygon at `t = 0`, counter-clockwise.
    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn velocity(&self) -> Vec2 {
        self.velocity
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn is_static(&self) -> bool {
        self.kind == ObstacleKind::Static
    }

    /// Copy with a different inflation margin.
    pub fn with_inflation(&self, inflation: f64) -> Result<Self, GeometryError> {
        Self::new(self.id, self.kind, self.vertices.clone(), self.velocity, inflation)
    }

    fn shift(&self, t: f64) -> Vec2 {
        self.velocity * t
    }

    /// Inflated polygon translated to time `t`.
    pub fn inflated_polygon_at(&self, t: f64) -> Vec<Vec2> {
        let d = self.shift(t);
        self.inflated.iter().map(|v| v + d).collect()
    }

    /// Half-space form `(G rows, b)` of the inflated obstacle at time `t`.
    pub fn halfspaces_at(&self, t: f64) -> (Vec<Vec2>, Vec<f64>) {
        let d = self.shift(t);
        let b = self.normals.iter().zip(&self.offsets).map(|(n, o)| o + n.dot(&d)).collect();
        (self.normals.clone(), b)
    }

    /// Signed distance from `p` to the inflated boundary at time `t` (negative inside)
    /// and the boundary point realizing it.
    pub fn signed_distance(&self, p: Vec2, t: f64) -> (f64, Vec2) {
        let q = p - self.shift(t);
        let n = self.normals.len();
        // inside test and deepest-face bookkeeping in one pass
        let mut inside = true;
        let mut min_slack = f64::INFINITY;
        let mut min_face = 0;
        for k in 0..n {
            let slack = self.offsets[k] - self.normals[k].dot(&q);
            if slack < 0.0 {
                inside = false;
                break;
            }
            if slack < min_slack {
                min_slack = slack;
                min_face = k;
            }
        }
        if inside {
            let nearest = q + min_slack * self.normals[min_face];
            return (-min_slack, nearest + self.shift(t));
        }
        let mut best = (f64::INFINITY, Vec2::zeros());
        for k in 0..n {
            let a = self.inflated[k];
            let b = self.inflated[(k + 1) % n];
            let e = b - a;
            let u = ((q - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            let c = a + u * e;
            let d = (q - c).norm();
            if d < best.0 {
                best = (d, c);
            }
        }
        (best.0, best.1 + self.shift(t))
    }
}

/// True iff `p` satisfies every half-space inequality of the inflated obstacle at `t`.
pub fn obstacle_contains(ob: &Obstacle, p: Vec2, t: f64) -> bool {
    let q = p - ob.shift(t);
    ob.normals.iter().zip(&ob.offsets).all(|(n, o)| n.dot(&q) <= *o)
}

/// Rectangular map with static and moving obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Obstacle>,
}

/// Result of a clearance query. `nearest` and `obstacle` are `None` when the
/// queried obstacle set is empty, in which case `distance` is `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    pub distance: f64,
    pub nearest: Option<Vec2>,
    pub obstacle: Option<usize>,
}

impl Clearance {
    const NONE: Clearance = Clearance { distance: f64::INFINITY, nearest: None, obstacle: None };
}

impl WorldMap {
    pub fn new(width: f64, height: f64, obstacles: Vec<Obstacle>) -> Self {
        Self { width, height, obstacles }
    }

    pub fn empty(width: f64, height: f64) -> Self {
        Self::new(width, height, Vec::new())
    }

    pub fn in_bounds(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    pub fn static_obstacles(&self) -> impl Iterator<Item = &Obstacle> {
        self.obstacles.iter().filter(|o| o.is_static())
    }

    pub fn dynamic_obstacles(&self) -> impl Iterator<Item = &Obstacle> {
        self.obstacles.iter().filter(|o| !o.is_static())
    }

    fn clearance_over<'a>(obs: impl Iterator<Item = &'a Obstacle>, p: Vec2, t: f64) -> Clearance {
        let mut best = Clearance::NONE;
        for ob in obs {
            let (d, c) = ob.signed_distance(p, t);
            if d < best.distance {
                best = Clearance { distance: d, nearest: Some(c), obstacle: Some(ob.id) };
            }
        }
        best
    }

    /// Clearance against static obstacles only.
    pub fn static_clearance(&self, p: Vec2) -> Clearance {
        Self::clearance_over(self.static_obstacles(), p, 0.0)
    }
}

/// Signed distance from `p` to the nearest obstacle boundary at time `t`, over all obstacles.
pub fn signed_clearance(map: &WorldMap, p: Vec2, t: f64) -> Clearance {
    WorldMap::clearance_over(map.obstacles.iter(), p, t)
}
