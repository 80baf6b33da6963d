//! Discrete first-order operators on a Voronoi mesh.
//!
//! The primal gradient is pointwise consistent; the dual (starred) gradient is
//! its negative adjoint under the volume-weighted inner product. Scalar and
//! tensor fields use zero-Neumann mirrors at walls, so the boundary facets of
//! the primal operators drop out. Velocity fields use mirrored ghost seeds
//! whose value depends on the boundary kind of the wall.

use rayon::prelude::*;

use crate::geometry::{BoundaryKind, DomainPolygon, EdgeCondition, Mat2, Vec2};
use crate::voronoi::Mesh;

/// Velocity ghost rules, one per domain edge.
#[derive(Debug, Clone)]
pub struct GhostPolicy {
    edges: Vec<EdgeCondition>,
}

impl GhostPolicy {
    pub fn from_domain(domain: &DomainPolygon) -> Self {
        Self { edges: domain.edges().to_vec() }
    }

    pub fn edge(&self, k: usize) -> &EdgeCondition {
        &self.edges[k]
    }

    /// Affine ghost map `v_ghost = R v + c` for a wall with outward normal `n`.
    pub fn velocity_map(&self, edge: usize, n: &Vec2) -> (Mat2, Vec2) {
        let cond = &self.edges[edge];
        let w = cond.wall_velocity;
        match cond.kind {
            BoundaryKind::FreeSlip => {
                let nn = n * n.transpose();
                (Mat2::identity() - 2.0 * nn, 2.0 * w.dot(n) * n)
            }
            BoundaryKind::NoSlip => (-Mat2::identity(), 2.0 * w),
            BoundaryKind::ZeroNeumann | BoundaryKind::Periodic => (Mat2::identity(), Vec2::zeros()),
        }
    }

    pub fn ghost_velocity(&self, edge: usize, n: &Vec2, v: &Vec2) -> Vec2 {
        let (r, c) = self.velocity_map(edge, n);
        r * v + c
    }
}

/// Primal gradient ⟨∇f⟩ with zero-Neumann walls.
pub fn gradient(mesh: &Mesh, f: &[f64]) -> Vec<Vec2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Vec2::zeros();
            for fc in &c.facets {
                acc += (fc.area / fc.distance) * (f[i] - f[fc.neighbor]) * (fc.centroid - x);
            }
            -acc / c.volume
        })
        .collect()
}

/// Dual gradient ⟨∇*f⟩, first algebraic form.
pub fn dual_gradient(mesh: &Mesh, f: &[f64]) -> Vec<Vec2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Vec2::zeros();
            for fc in &c.facets {
                let w = fc.area / fc.distance;
                acc += w * (f[i] * (fc.centroid - x) - f[fc.neighbor] * (fc.centroid - fc.neighbor_pos));
            }
            acc / c.volume
        })
        .collect()
}

/// Dual gradient, second algebraic form (difference about the seed midpoint
/// plus the averaged seed-separation term).
pub fn dual_gradient_split(mesh: &Mesh, f: &[f64]) -> Vec<Vec2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Vec2::zeros();
            for fc in &c.facets {
                let fj = f[fc.neighbor];
                let mid = 0.5 * (x + fc.neighbor_pos);
                acc += (fc.area / fc.distance)
                    * ((f[i] - fj) * (fc.centroid - mid) - 0.5 * (f[i] + fj) * (x - fc.neighbor_pos));
            }
            acc / c.volume
        })
        .collect()
}

/// Mirror of seed `i` across the wall carrying boundary facet `b`.
fn ghost_seed(mesh: &Mesh, i: usize, edge: usize) -> Vec2 {
    mesh.domain.reflect(edge, &mesh.seeds[i])
}

/// Primal divergence of a velocity field with ghost walls.
pub fn divergence(mesh: &Mesh, v: &[Vec2], ghosts: &GhostPolicy) -> Vec<f64> {
    velocity_gradient(mesh, v, ghosts).iter().map(|g| g.trace()).collect()
}

/// Dual divergence ⟨div* v⟩; walls contribute nothing.
pub fn dual_divergence(mesh: &Mesh, v: &[Vec2]) -> Vec<f64> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = 0.0;
            for fc in &c.facets {
                acc += (fc.area / fc.distance)
                    * (v[i].dot(&(fc.centroid - x)) - v[fc.neighbor].dot(&(fc.centroid - fc.neighbor_pos)));
            }
            acc / c.volume
        })
        .collect()
}

/// Primal divergence of a tensor field, `(div T)_a = Σ_b ∂_b T_ab`, with
/// zero-Neumann walls.
pub fn tensor_divergence(mesh: &Mesh, t: &[Mat2]) -> Vec<Vec2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Vec2::zeros();
            for fc in &c.facets {
                acc += (fc.area / fc.distance) * ((t[i] - t[fc.neighbor]) * (fc.centroid - x));
            }
            -acc / c.volume
        })
        .collect()
}

/// Primal velocity gradient, `G_ab ≈ ∂v_a/∂x_b`, with ghost walls.
pub fn velocity_gradient(mesh: &Mesh, v: &[Vec2], ghosts: &GhostPolicy) -> Vec<Mat2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Mat2::zeros();
            for fc in &c.facets {
                acc += (fc.area / fc.distance) * (v[i] - v[fc.neighbor]) * (fc.centroid - x).transpose();
            }
            for b in &c.boundary {
                let xg = ghost_seed(mesh, i, b.edge);
                let r = (xg - x).norm();
                let vg = ghosts.ghost_velocity(b.edge, &b.normal, &v[i]);
                acc += (b.area / r) * (v[i] - vg) * (b.centroid - x).transpose();
            }
            -acc / c.volume
        })
        .collect()
}

/// Dual velocity gradient ⟨∇*v⟩ including mirrored ghost seeds at walls.
/// This is the strain operator of the viscous stress.
pub fn dual_velocity_gradient(mesh: &Mesh, v: &[Vec2], ghosts: &GhostPolicy) -> Vec<Mat2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Mat2::zeros();
            for fc in &c.facets {
                acc += (fc.area / fc.distance)
                    * (v[i] * (fc.centroid - x).transpose()
                        - v[fc.neighbor] * (fc.centroid - fc.neighbor_pos).transpose());
            }
            for b in &c.boundary {
                let xg = ghost_seed(mesh, i, b.edge);
                let r = (xg - x).norm();
                let vg = ghosts.ghost_velocity(b.edge, &b.normal, &v[i]);
                acc += (b.area / r) * (v[i] * (b.centroid - x).transpose() - vg * (b.centroid - xg).transpose());
            }
            acc / c.volume
        })
        .collect()
}

/// Transpose of the linear part of `v ↦ |ω_i| ⟨∇*v⟩_i` under the Frobenius
/// pairing: returns ∂/∂v_k of Σ_i Y_i : (|ω_i| ⟨∇*v⟩_i). On interior cells
/// this equals `-|ω_k| ⟨div Y⟩_k`.
pub fn dual_velocity_gradient_transpose(mesh: &Mesh, y: &[Mat2], ghosts: &GhostPolicy) -> Vec<Vec2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let x = mesh.seeds[k];
            let mut acc = Vec2::zeros();
            for fc in &c.facets {
                acc += (fc.area / fc.distance) * ((y[k] - y[fc.neighbor]) * (fc.centroid - x));
            }
            for b in &c.boundary {
                let xg = ghost_seed(mesh, k, b.edge);
                let r = (xg - x).norm();
                let (rm, _) = ghosts.velocity_map(b.edge, &b.normal);
                acc += (b.area / r) * (y[k] * (b.centroid - x) - rm.transpose() * (y[k] * (b.centroid - xg)));
            }
            acc
        })
        .collect()
}

pub fn symmetric_part(g: &Mat2) -> Mat2 {
    0.5 * (g + g.transpose())
}
