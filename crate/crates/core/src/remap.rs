//! Mesh repair: one color-weighted Lloyd pass followed by a conservative
//! Rusanov remap of mass, momentum and total energy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cross, Vec2};
use crate::state::{FlowState, Fluid, SmoothedColor};
use crate::voronoi::{build_mesh, cell_quality, polygon_weighted_centroid, Mesh, QualityReport};

pub const DEFAULT_Q_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTotals {
    pub mass: f64,
    pub momentum: Vec2,
    pub energy: f64,
}

impl PhaseTotals {
    pub fn of(state: &FlowState, color: u8) -> Self {
        Self {
            mass: state.total_mass(Some(color)),
            momentum: state.total_momentum(Some(color)),
            energy: state.total_energy(Some(color)),
        }
    }

    /// Largest relative change of any total against `other`.
    pub fn max_rel_change(&self, other: &Self) -> f64 {
        let scale_m = self.mass.abs().max(other.mass.abs()).max(f64::MIN_POSITIVE);
        // Net momentum may vanish; sqrt(M|E|) is a momentum scale that does not.
        let scale_u = self.momentum.norm().max(other.momentum.norm()).max((self.mass * self.energy.abs()).sqrt());
        let scale_e = self.energy.abs().max(other.energy.abs());
        let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { d };
        rel((self.mass - other.mass).abs(), scale_m)
            .max(rel((self.momentum - other.momentum).norm(), scale_u))
            .max(rel((self.energy - other.energy).abs(), scale_e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemapReport {
    pub triggered: bool,
    pub q_before: f64,
    pub q_after: f64,
    /// Per-phase totals, indexed by color.
    pub before: [PhaseTotals; 2],
    pub after: [PhaseTotals; 2],
    pub max_displacement: f64,
}

/// True iff the mesh quality has dropped strictly below `threshold`.
pub fn needs_remap(quality: &QualityReport, threshold: f64) -> bool {
    quality.mesh < threshold
}

/// Lloyd target of every seed: the cell centroid weighted by `C^H` for
/// color-1 cells and by `1 - C^H` for color-0 cells.
pub fn lloyd_positions(mesh: &Mesh, color: &[u8], h: f64) -> Vec<Vec2> {
    let smooth = SmoothedColor::new(mesh, color, h);
    (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let cell = &mesh.cells[i];
            let target = if color[i] == 1 {
                polygon_weighted_centroid(&cell.vertices, &|p: &Vec2| smooth.eval(p))
            } else {
                polygon_weighted_centroid(&cell.vertices, &|p: &Vec2| 1.0 - smooth.eval(p))
            };
            inside(&cell.vertices, cell.centroid, target.unwrap_or(cell.centroid))
        })
        .collect()
}

/// Pulls `p` toward `anchor` until it lies strictly inside the convex cell.
fn inside(vertices: &[Vec2], anchor: Vec2, mut p: Vec2) -> Vec2 {
    let n = vertices.len();
    let strictly_inside = |q: &Vec2| {
        (0..n).all(|k| {
            let a = vertices[k];
            let b = vertices[(k + 1) % n];
            let e = b - a;
            cross(&e, &(q - a)) > 1e-12 * e.norm_squared()
        })
    };
    for _ in 0..60 {
        if strictly_inside(&p) {
            return p;
        }
        p = anchor + 0.5 * (p - anchor);
    }
    anchor
}

/// Rusanov flux of the cell-wise field `phi` for seed displacements `dx`,
/// summed over same-color neighbors on the pre-remap mesh.
pub fn rusanov_flux<T>(mesh: &Mesh, color: &[u8], dx: &[Vec2], phi: &[T]) -> Vec<T>
where
    T: Copy + Send + Sync + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let xi = mesh.seeds[i];
            let di = dx[i];
            let mut acc = T::default();
            for f in &mesh.cells[i].facets {
                let j = f.neighbor;
                if color[j] != color[i] {
                    continue;
                }
                let dj = dx[j];
                let a = di.dot(&(f.centroid - xi));
                let b = dj.dot(&(f.centroid - f.neighbor_pos));
                let speed = di.norm().max(dj.norm());
                let term = phi[i] * a - phi[j] * b - (phi[i] - phi[j]) * (0.5 * f.distance * speed);
                acc = acc + term * (f.area / f.distance);
            }
            acc
        })
        .collect()
}

/// Smallest fraction of its mass a cell may keep through one remap.
pub const MIN_MASS_FRACTION: f64 = 0.25;

/// Pulls `targets` toward the current seeds by one common factor so that no
/// cell keeps less than [`MIN_MASS_FRACTION`] of its mass. The flux is
/// linear in the displacements, so the factor is exact.
pub fn limit_targets(state: &FlowState, mesh: &Mesh, targets: &[Vec2]) -> Vec<Vec2> {
    let dx: Vec<Vec2> = targets.iter().zip(&mesh.seeds).map(|(t, x)| t - x).collect();
    let fm = rusanov_flux(mesh, &state.color, &dx, &state.rho);
    let theta = fm
        .iter()
        .zip(&state.mass)
        .filter(|(f, _)| **f < 0.0)
        .map(|(f, m)| (1.0 - MIN_MASS_FRACTION) * m / -f)
        .fold(1.0, f64::min);
    if theta >= 1.0 {
        return targets.to_vec();
    }
    mesh.seeds.iter().zip(&dx).map(|(x, d)| x + theta * d).collect()
}

/// Moves the seeds toward `targets` (see [`limit_targets`]) and remaps `M`,
/// `U = Mv` and `E = Me` with the phase-restricted Rusanov flux. Returns the
/// rebuilt mesh.
pub fn rusanov_remap(state: &mut FlowState, mesh: &Mesh, fluid: &Fluid, targets: &[Vec2]) -> Result<Mesh> {
    let n = state.len();
    if targets.len() != n {
        return Err(Error::InvalidParameter("remap target count differs from cell count".into()));
    }
    let targets = limit_targets(state, mesh, targets);
    let dx: Vec<Vec2> = (0..n).map(|i| targets[i] - mesh.seeds[i]).collect();
    let rho = &state.rho;
    let mom: Vec<Vec2> = (0..n).map(|i| rho[i] * state.v[i]).collect();
    let ener: Vec<f64> = (0..n).map(|i| rho[i] * state.e[i]).collect();
    let fm = rusanov_flux(mesh, &state.color, &dx, rho);
    let fu = rusanov_flux(mesh, &state.color, &dx, &mom);
    let fe = rusanov_flux(mesh, &state.color, &dx, &ener);

    let mut mass = vec![0.0; n];
    let mut u = vec![Vec2::zeros(); n];
    let mut e = vec![0.0; n];
    for i in 0..n {
        mass[i] = state.mass[i] + fm[i];
        if !(mass[i] > 0.0) {
            return Err(Error::NegativeMass { cell: i, mass: mass[i] });
        }
        u[i] = state.mass[i] * state.v[i] + fu[i];
        e[i] = state.mass[i] * state.e[i] + fe[i];
    }

    let x: Vec<Vec2> = targets.iter().map(|&p| mesh.domain.wrap(p)).collect();
    let new_mesh = build_mesh(&x, &mesh.domain)?;
    for i in 0..n {
        state.rho[i] = mass[i] / new_mesh.cells[i].volume;
        state.v[i] = u[i] / mass[i];
        state.e[i] = e[i] / mass[i];
    }
    state.mass = mass;
    state.x = x;
    state.update_thermo(&new_mesh, fluid)?;
    Ok(new_mesh)
}

/// Checks the mesh quality and, when it is below `threshold`, performs one
/// Lloyd pass and remap. Returns the new mesh if a remap happened.
pub fn remap_if_needed(
    state: &mut FlowState,
    mesh: &Mesh,
    fluid: &Fluid,
    threshold: f64,
) -> Result<(Option<Mesh>, RemapReport)> {
    let q = cell_quality(mesh);
    if !needs_remap(&q, threshold) {
        let totals = [PhaseTotals::of(state, 0), PhaseTotals::of(state, 1)];
        let report = RemapReport {
            triggered: false,
            q_before: q.mesh,
            q_after: q.mesh,
            before: totals,
            after: totals,
            max_displacement: 0.0,
        };
        return Ok((None, report));
    }
    let (m, report) = remap(state, mesh, fluid)?;
    Ok((Some(m), report))
}

/// Unconditional Lloyd pass and remap.
pub fn remap(state: &mut FlowState, mesh: &Mesh, fluid: &Fluid) -> Result<(Mesh, RemapReport)> {
    let q_before = cell_quality(mesh).mesh;
    let before = [PhaseTotals::of(state, 0), PhaseTotals::of(state, 1)];
    let h = fluid.smoothing_radius(mesh);
    let targets = limit_targets(state, mesh, &lloyd_positions(mesh, &state.color, h));
    let max_displacement = targets.iter().zip(&mesh.seeds).map(|(t, s)| (t - s).norm()).fold(0.0, f64::max);
    let new_mesh = rusanov_remap(state, mesh, fluid, &targets)?;
    let report = RemapReport {
        triggered: true,
        q_before,
        q_after: cell_quality(&new_mesh).mesh,
        before,
        after: [PhaseTotals::of(state, 0), PhaseTotals::of(state, 1)],
        max_displacement,
    };
    Ok((new_mesh, report))
}
