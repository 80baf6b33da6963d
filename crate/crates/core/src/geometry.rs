//! Planar primitives and the convex computational domain.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed area of a closed polygon (positive when counterclockwise).
pub fn polygon_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let o = vertices[0];
    let mut acc = 0.0;
    for k in 1..n - 1 {
        acc += cross(&(vertices[k] - o), &(vertices[k + 1] - o));
    }
    0.5 * acc
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(vertices: &[Vec2]) -> Vec2 {
    let n = vertices.len();
    let o = vertices[0];
    let mut area = 0.0;
    let mut moment = Vec2::zeros();
    for k in 1..n.saturating_sub(1) {
        let a = vertices[k] - o;
        let b = vertices[k + 1] - o;
        let w = cross(&a, &b);
        area += w;
        moment += w * (a + b) / 3.0;
    }
    if area.abs() < f64::MIN_POSITIVE {
        return vertex_mean(vertices);
    }
    o + moment / area
}

pub fn vertex_mean(vertices: &[Vec2]) -> Vec2 {
    let s: Vec2 = vertices.iter().sum();
    s / vertices.len() as f64
}

pub fn polygon_diameter(vertices: &[Vec2]) -> f64 {
    let mut d2: f64 = 0.0;
    for (k, a) in vertices.iter().enumerate() {
        for b in &vertices[k + 1..] {
            d2 = d2.max((a - b).norm_squared());
        }
    }
    d2.sqrt()
}

/// Discrete boundary treatment attached to one edge of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Reflect the normal velocity component relative to the wall.
    FreeSlip,
    /// Mirror the full velocity relative to the wall velocity.
    NoSlip,
    /// Edge paired with the opposite edge of a rectangle.
    Periodic,
    /// Mirror every field unchanged (outflow-like for velocity).
    ZeroNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCondition {
    pub kind: BoundaryKind,
    pub wall_velocity: Vec2,
}

impl EdgeCondition {
    pub fn new(kind: BoundaryKind) -> Self {
        Self { kind, wall_velocity: Vec2::zeros() }
    }

    pub fn moving(kind: BoundaryKind, wall_velocity: Vec2) -> Self {
        Self { kind, wall_velocity }
    }
}

/// Convex polygon with per-edge boundary conditions. Edge `k` runs from
/// vertex `k` to vertex `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPolygon {
    vertices: Vec<Vec2>,
    edges: Vec<EdgeCondition>,
    /// Period along x and y when the domain is a periodic rectangle.
    period: [Option<f64>; 2],
}

const PERIODIC_TOL: f64 = 1e-12;

impl DomainPolygon {
    pub fn new(vertices: Vec<Vec2>, edges: Vec<EdgeCondition>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidDomain("fewer than 3 vertices".into()));
        }
        if edges.len() != vertices.len() {
            return Err(Error::InvalidDomain("one boundary condition per edge is required".into()));
        }
        let n = vertices.len();
        for k in 0..n {
            let a = vertices[(k + 1) % n] - vertices[k];
            let b = vertices[(k + 2) % n] - vertices[(k + 1) % n];
            if cross(&a, &b) <= 0.0 {
                return Err(Error::InvalidDomain(
                    "polygon must be strictly convex and counterclockwise".into(),
                ));
            }
        }
        let mut domain = Self { vertices, edges, period: [None, None] };
        domain.period = domain.detect_period()?;
        Ok(domain)
    }

    /// Axis-aligned rectangle; edges ordered bottom, right, top, left.
    pub fn rectangle(min: Vec2, max: Vec2, edges: [EdgeCondition; 4]) -> Result<Self> {
        Self::new(
            vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)],
            edges.to_vec(),
        )
    }

    pub fn rectangle_uniform(min: Vec2, max: Vec2, kind: BoundaryKind) -> Result<Self> {
        Self::rectangle(min, max, [EdgeCondition::new(kind); 4])
    }

    fn detect_period(&self) -> Result<[Option<f64>; 2]> {
        let any_periodic = self.edges.iter().any(|e| e.kind == BoundaryKind::Periodic);
        if !any_periodic {
            return Ok([None, None]);
        }
        let (min, max) = self.bounding_box();
        let is_rect = self.vertices.len() == 4
            && self.vertices.iter().all(|v| {
                ((v.x - min.x).abs() < PERIODIC_TOL || (v.x - max.x).abs() < PERIODIC_TOL)
                    && ((v.y - min.y).abs() < PERIODIC_TOL || (v.y - max.y).abs() < PERIODIC_TOL)
            });
        if !is_rect {
            return Err(Error::InvalidDomain("periodic edges require an axis-aligned rectangle".into()));
        }
        let mut periodic_x = [false, false];
        let mut periodic_y = [false, false];
        for k in 0..4 {
            let e = self.edge_vector(k);
            let p = self.edges[k].kind == BoundaryKind::Periodic;
            if e.x.abs() > e.y.abs() {
                periodic_y[(e.x < 0.0) as usize] = p;
            } else {
                periodic_x[(e.y < 0.0) as usize] = p;
            }
        }
        if periodic_x[0] != periodic_x[1] || periodic_y[0] != periodic_y[1] {
            return Err(Error::InvalidDomain("periodic edges must come in opposite pairs".into()));
        }
        if self.edges.iter().any(|e| e.kind == BoundaryKind::Periodic && e.wall_velocity != Vec2::zeros()) {
            return Err(Error::InvalidDomain("periodic edges cannot move".into()));
        }
        Ok([
            periodic_x[0].then_some(max.x - min.x),
            periodic_y[0].then_some(max.y - min.y),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeCondition] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.vertices.len()
    }

    pub fn period(&self) -> [Option<f64>; 2] {
        self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.period[0].is_some() || self.period[1].is_some()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices {
            min = min.inf(v);
            max = max.sup(v);
        }
        (min, max)
    }

    pub fn diameter(&self) -> f64 {
        polygon_diameter(&self.vertices)
    }

    pub fn edge_vector(&self, k: usize) -> Vec2 {
        self.vertices[(k + 1) % self.vertices.len()] - self.vertices[k]
    }

    /// Outward unit normal of edge `k`.
    pub fn edge_normal(&self, k: usize) -> Vec2 {
        let e = self.edge_vector(k);
        Vec2::new(e.y, -e.x).normalize()
    }

    /// Signed distance from `p` to the line of edge `k`, negative inside.
    pub fn edge_distance(&self, k: usize, p: &Vec2) -> f64 {
        (p - self.vertices[k]).dot(&self.edge_normal(k))
    }

    pub fn contains_strictly(&self, p: &Vec2) -> bool {
        (0..self.num_edges()).all(|k| self.edge_distance(k, p) < 0.0)
    }

    /// Maps a point into the fundamental cell along periodic axes.
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        let (min, _) = self.bounding_box();
        let mut q = p;
        for axis in 0..2 {
            if let Some(len) = self.period[axis] {
                let rel = (q[axis] - min[axis]).rem_euclid(len);
                q[axis] = min[axis] + rel;
            }
        }
        q
    }

    /// Wraps `p` along periodic axes and mirrors it back across any wall it
    /// has crossed. A seed advected through a wall by a finite step lands at
    /// its mirror image, at the same distance inside.
    pub fn confine(&self, p: Vec2) -> Vec2 {
        let mut q = self.wrap(p);
        for _ in 0..4 {
            let mut moved = false;
            for k in 0..self.num_edges() {
                if self.edges[k].kind != BoundaryKind::Periodic && self.edge_distance(k, &q) >= 0.0 {
                    q = self.reflect(k, &q);
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        q
    }

    /// Mirror image of `p` across the line of edge `k`.
    pub fn reflect(&self, k: usize, p: &Vec2) -> Vec2 {
        let n = self.edge_normal(k);
        p - 2.0 * self.edge_distance(k, p) * n
    }

    /// Domain after every edge line has translated along its normal by
    /// `dt * (wall_velocity . n)`.
    pub fn advanced(&self, dt: f64) -> Result<Self> {
        if self.edges.iter().all(|e| e.wall_velocity == Vec2::zeros()) {
            return Ok(self.clone());
        }
        let n = self.num_edges();
        let lines: Vec<(Vec2, Vec2)> = (0..n)
            .map(|k| {
                let normal = self.edge_normal(k);
                let shift = dt * self.edges[k].wall_velocity.dot(&normal);
                (self.vertices[k] + shift * normal, self.edge_vector(k))
            })
            .collect();
        let mut vertices = Vec::with_capacity(n);
        for k in 0..n {
            let (p0, d0) = lines[(k + n - 1) % n];
            let (p1, d1) = lines[k];
            let denom = cross(&d0, &d1);
            let s = cross(&(p1 - p0), &d1) / denom;
            vertices.push(p0 + s * d0);
        }
        Self::new(vertices, self.edges.clone())
    }
}
