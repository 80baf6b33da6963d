//! Operator-split time integration: a viscous (irreversible) substep on the
//! current mesh followed by the semi-implicit pressure (reversible) substep
//! on the advected mesh.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::linalg::{pcg, pcg_with, Amg, Anderson, CgReport, CsrMatrix};
use crate::operators::{
    dual_divergence, dual_velocity_gradient, dual_velocity_gradient_transpose, symmetric_part, tensor_divergence,
    GhostPolicy,
};
use crate::state::{artificial_viscosity, color_gradient, surface_stress, Fluid, FlowState};
use crate::voronoi::{build_mesh, Mesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    Fixed(f64),
    /// `Δt = cfl · min_i h_i / max(|v_i| + c_i, v_ref)`, where `c_i` counts
    /// only for ideal-gas cells and only when `acoustic` is set.
    Cfl { cfl: f64, v_ref: f64, acoustic: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViscousMode {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    pub dt: DtPolicy,
    pub dt_max: f64,
    pub viscous: ViscousMode,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt: DtPolicy::Cfl { cfl: 0.4, v_ref: 1.0, acoustic: false },
            dt_max: f64::INFINITY,
            viscous: ViscousMode::Explicit,
            cg_tol: 1e-10,
            cg_max_iter: 5000,
            fp_tol: 1e-6,
            fp_max_iter: 50,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.to_string()));
        match self.dt {
            DtPolicy::Fixed(dt) if !(dt > 0.0) => return bad("fixed time step must be positive"),
            DtPolicy::Cfl { cfl, v_ref, .. } if !(cfl > 0.0 && cfl <= 1.0) || !(v_ref > 0.0) => {
                return bad("CFL must lie in (0, 1] and v_ref must be positive")
            }
            _ => {}
        }
        if !(self.cg_tol > 0.0 && self.fp_tol > 0.0) {
            return bad("solver tolerances must be positive");
        }
        if self.cg_max_iter == 0 || self.fp_max_iter == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.dt_max > 0.0) {
            return bad("dt_max must be positive");
        }
        Ok(())
    }
}

/// Iteration counts of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub viscous_cg: usize,
    pub pressure_cg: usize,
    pub fixed_point: usize,
}

/// Time step from the CFL rule, capped by `dt_max`, for explicit viscosity
/// by `¼ ρ h² / μ`, and across interfaces by the capillary bound
/// `sqrt(ρ̄ Δx³ / (2πσ))` with `Δx = sqrt|ω|`.
pub fn compute_dt(state: &FlowState, mesh: &Mesh, fluid: &Fluid, controls: &StepControls) -> f64 {
    let mut dt = match controls.dt {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Cfl { cfl, v_ref, acoustic } => (0..state.len())
            .map(|i| {
                let c = if acoustic && fluid.material(state.color[i]).is_ideal_gas() { state.c[i] } else { 0.0 };
                cfl * mesh.cells[i].diameter / (state.v[i].norm() + c).max(v_ref)
            })
            .fold(f64::INFINITY, f64::min),
    };
    if controls.viscous == ViscousMode::Explicit {
        for i in 0..state.len() {
            let mu = fluid.material(state.color[i]).viscosity;
            if mu > 0.0 {
                let h = mesh.cells[i].diameter;
                dt = dt.min(0.25 * state.rho[i] * h * h / mu);
            }
        }
    }
    if fluid.sigma > 0.0 {
        for (i, cell) in mesh.cells.iter().enumerate() {
            for f in cell.facets.iter().filter(|f| state.color[f.neighbor] != state.color[i]) {
                let rho_bar = 0.5 * (state.rho[i] + state.rho[f.neighbor]);
                let dx = cell.volume.sqrt();
                dt = dt.min((rho_bar * dx.powi(3) / (2.0 * std::f64::consts::PI * fluid.sigma)).sqrt());
            }
        }
    }
    dt.min(controls.dt_max)
}

/// Cell viscosity: material value plus, when enabled, the Stone–Norman term
/// with `δr = h_i` in ideal-gas cells.
pub fn viscosity_field(state: &FlowState, mesh: &Mesh, fluid: &Fluid, ghosts: &GhostPolicy) -> Vec<f64> {
    let mut mu: Vec<f64> = state.color.iter().map(|&c| fluid.material(c).viscosity).collect();
    if fluid.artificial_viscosity {
        let g = dual_velocity_gradient(mesh, &state.v, ghosts);
        for i in 0..mu.len() {
            if fluid.material(state.color[i]).is_ideal_gas() {
                mu[i] += artificial_viscosity(state.rho[i], &symmetric_part(&g[i]), mesh.cells[i].diameter);
            }
        }
    }
    mu
}

fn scale_tensors(mu: &[f64], d: &[Mat2]) -> Vec<Mat2> {
    mu.iter().zip(d).map(|(m, d)| 2.0 * m * d).collect()
}

/// `2|ω| div(μD)` in adjoint form, i.e. minus the transpose of the strain
/// operator applied to `2μD`.
fn viscous_force(mesh: &Mesh, ghosts: &GhostPolicy, mu: &[f64], d: &[Mat2]) -> Vec<Vec2> {
    dual_velocity_gradient_transpose(mesh, &scale_tensors(mu, d), ghosts).into_iter().map(|f| -f).collect()
}

fn viscous_energy_update(
    state: &mut FlowState,
    mesh: &Mesh,
    ghosts: &GhostPolicy,
    mu: &[f64],
    v: &[Vec2],
    dt: f64,
) -> Vec<Vec2> {
    let g = dual_velocity_gradient(mesh, v, ghosts);
    let d: Vec<Mat2> = g.iter().map(symmetric_part).collect();
    let f = viscous_force(mesh, ghosts, mu, &d);
    for i in 0..state.len() {
        let work = f[i].dot(&v[i]) + 2.0 * mesh.cells[i].volume * mu[i] * d[i].component_mul(&g[i]).sum();
        state.e[i] += dt * work / state.mass[i];
    }
    f
}

pub(crate) fn set_density(state: &mut FlowState, mesh: &Mesh) {
    for (i, c) in mesh.cells.iter().enumerate() {
        state.rho[i] = state.mass[i] / c.volume;
    }
}

/// Explicit viscous substep with the strain of the incoming velocity.
pub fn irreversible_step_explicit(state: &mut FlowState, mesh: &Mesh, fluid: &Fluid, dt: f64) -> Result<()> {
    let ghosts = GhostPolicy::from_domain(&mesh.domain);
    set_density(state, mesh);
    let mu = viscosity_field(state, mesh, fluid, &ghosts);
    if mu.iter().all(|&m| m == 0.0) {
        return Ok(());
    }
    let v0 = state.v.clone();
    let f = viscous_energy_update(state, mesh, &ghosts, &mu, &v0, dt);
    for i in 0..state.len() {
        state.v[i] += dt * f[i] / state.mass[i];
    }
    Ok(())
}

/// Matrix-free viscous operator `A v = M v / Δt + Lᵀ(2μ sym(L v))`, where `L`
/// is the linear part of the strain operator.
pub struct ViscousSystem<'a> {
    mesh: &'a Mesh,
    ghosts: GhostPolicy,
    mu: Vec<f64>,
    mass: &'a [f64],
    dt: f64,
    /// Strain-operator response to the wall velocities alone.
    affine: Vec<Mat2>,
}

impl<'a> ViscousSystem<'a> {
    pub fn new(mesh: &'a Mesh, mu: Vec<f64>, mass: &'a [f64], dt: f64) -> Self {
        let ghosts = GhostPolicy::from_domain(&mesh.domain);
        let affine = dual_velocity_gradient(mesh, &vec![Vec2::zeros(); mesh.len()], &ghosts);
        Self { mesh, ghosts, mu, mass, dt, affine }
    }

    fn linear_strain(&self, v: &[Vec2]) -> Vec<Mat2> {
        dual_velocity_gradient(self.mesh, v, &self.ghosts)
            .iter()
            .zip(&self.affine)
            .map(|(g, a)| symmetric_part(&(g - a)))
            .collect()
    }

    pub fn apply(&self, v: &[Vec2]) -> Vec<Vec2> {
        let d = self.linear_strain(v);
        let t = dual_velocity_gradient_transpose(self.mesh, &scale_tensors(&self.mu, &d), &self.ghosts);
        (0..v.len()).map(|i| self.mass[i] * v[i] / self.dt + t[i]).collect()
    }

    pub fn rhs(&self, v0: &[Vec2]) -> Vec<Vec2> {
        let d: Vec<Mat2> = self.affine.iter().map(symmetric_part).collect();
        let t = dual_velocity_gradient_transpose(self.mesh, &scale_tensors(&self.mu, &d), &self.ghosts);
        (0..v0.len()).map(|i| self.mass[i] * v0[i] / self.dt - t[i]).collect()
    }

    /// `Σ M|v|²/Δt + Σ 2|ω|μ|sym(L v)|²`.
    pub fn quadratic_form(&self, v: &[Vec2]) -> f64 {
        let d = self.linear_strain(v);
        (0..v.len())
            .map(|i| {
                self.mass[i] * v[i].norm_squared() / self.dt
                    + 2.0 * self.mesh.cells[i].volume * self.mu[i] * d[i].norm_squared()
            })
            .sum()
    }

    /// Diagonal of `A` per velocity component, for Jacobi preconditioning.
    pub fn diagonal(&self) -> Vec<[f64; 2]> {
        let mesh = self.mesh;
        (0..mesh.len())
            .into_par_iter()
            .map(|k| {
                let c = &mesh.cells[k];
                let x = mesh.seeds[k];
                let mut out = [0.0; 2];
                for (a, slot) in out.iter_mut().enumerate() {
                    let mut ea = Vec2::zeros();
                    ea[a] = 1.0;
                    let mut own = Mat2::zeros();
                    let mut others = 0.0;
                    for f in &c.facets {
                        let w = f.area / f.distance;
                        let arm = f.centroid - x;
                        own += w * ea * arm.transpose();
                        let vol_j = mesh.cells[f.neighbor].volume;
                        let s = symmetric_part(&(w * ea * arm.transpose()));
                        others += 2.0 * self.mu[f.neighbor] * s.norm_squared() / vol_j;
                    }
                    for b in &c.boundary {
                        let xg = mesh.domain.reflect(b.edge, &x);
                        let r = (xg - x).norm();
                        let (rm, _) = self.ghosts.velocity_map(b.edge, &b.normal);
                        own += (b.area / r) * (ea * (b.centroid - x).transpose() - (rm * ea) * (b.centroid - xg).transpose());
                    }
                    let s = symmetric_part(&own);
                    *slot = self.mass[k] / self.dt + 2.0 * self.mu[k] * s.norm_squared() / c.volume + others;
                }
                out
            })
            .collect()
    }
}

fn flatten(v: &[Vec2]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn unflatten(x: &[f64]) -> Vec<Vec2> {
    x.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Implicit viscous substep solved by matrix-free CG; energy is updated
/// with the converged velocity. Returns the CG iteration count.
pub fn irreversible_step_implicit(
    state: &mut FlowState,
    mesh: &Mesh,
    fluid: &Fluid,
    dt: f64,
    controls: &StepControls,
) -> Result<usize> {
    let ghosts = GhostPolicy::from_domain(&mesh.domain);
    set_density(state, mesh);
    let mu = viscosity_field(state, mesh, fluid, &ghosts);
    if mu.iter().all(|&m| m == 0.0) {
        return Ok(0);
    }
    let mass = state.mass.clone();
    let sys = ViscousSystem::new(mesh, mu.clone(), &mass, dt);
    let b = flatten(&sys.rhs(&state.v));
    let diag: Vec<f64> = sys.diagonal().into_iter().flatten().collect();
    let mut x = flatten(&state.v);
    let rep = pcg(
        "viscous CG",
        |p, out| out.copy_from_slice(&flatten(&sys.apply(&unflatten(p)))),
        &b,
        &mut x,
        &diag,
        controls.cg_tol,
        controls.cg_max_iter,
    )?;
    let v1 = unflatten(&x);
    viscous_energy_update(state, mesh, &ghosts, &mu, &v1, dt);
    state.v = v1;
    Ok(rep.iterations)
}

/// Surface-tension force density `⟨div S⟩` on `mesh`.
pub fn surface_tension_force(mesh: &Mesh, color: &[u8], fluid: &Fluid) -> Vec<Vec2> {
    if fluid.sigma == 0.0 {
        return vec![Vec2::zeros(); mesh.len()];
    }
    let h = mesh.mean_spacing();
    let grad = color_gradient(mesh, color, fluid.smoothing_ratio * h);
    let s: Vec<Mat2> = grad.iter().map(|g| surface_stress(g, fluid.sigma, h)).collect();
    tensor_divergence(mesh, &s)
}

/// `ṽ = v + Δt ⟨div S⟩/ρ + Δt g` on the advected mesh; also returns
/// `⟨div S⟩` for reuse in the final update.
pub fn predict_velocity(state: &FlowState, mesh: &Mesh, fluid: &Fluid, dt: f64) -> (Vec<Vec2>, Vec<Vec2>) {
    let div_s = surface_tension_force(mesh, &state.color, fluid);
    let vt = (0..state.len()).map(|i| state.v[i] + dt * div_s[i] / state.rho[i] + dt * fluid.gravity).collect();
    (vt, div_s)
}

/// Volume rate contributed by moving walls, `Σ_b |Γ_b| (u_w · n_b) / |ω|`.
pub fn wall_volume_rate(mesh: &Mesh) -> Vec<f64> {
    let edges = mesh.domain.edges();
    mesh.cells
        .iter()
        .map(|c| c.boundary.iter().map(|b| b.area * edges[b.edge].wall_velocity.dot(&b.normal)).sum::<f64>() / c.volume)
        .collect()
}

/// Primal pressure gradient. The wall ghost is the hydrostatic mirror
/// `p_g = p_i + ρ_i g·(x_g − x_i)`, which is zero-Neumann without gravity.
pub fn pressure_gradient(mesh: &Mesh, p: &[f64], rho: &[f64], gravity: &Vec2) -> Vec<Vec2> {
    mesh.cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let x = mesh.seeds[i];
            let mut acc = Vec2::zeros();
            for f in &c.facets {
                acc += (f.area / f.distance) * (p[i] - p[f.neighbor]) * (f.centroid - x);
            }
            if *gravity != Vec2::zeros() {
                for b in &c.boundary {
                    let xg = mesh.domain.reflect(b.edge, &x);
                    let dp = -rho[i] * gravity.dot(&(xg - x));
                    acc += (b.area / (xg - x).norm()) * dp * (b.centroid - x);
                }
            }
            -acc / c.volume
        })
        .collect()
}

/// Compact Helmholtz matrix of the pressure step,
/// `(A p)_i = d_i p_i + Σ_j (|Γ|/r)(1/2ρ_i + 1/2ρ_j)(p_i − p_j)`.
#[derive(Debug, Clone)]
pub struct PressureSystem {
    pub diag: Vec<f64>,
    start: Vec<usize>,
    cols: Vec<usize>,
    coef: Vec<f64>,
}

impl PressureSystem {
    /// `d_i = |ω_i| / (Δt² ρ_i c_i²)`, zero for incompressible cells.
    pub fn assemble(mesh: &Mesh, rho: &[f64], c: &[f64], dt: f64) -> Self {
        let diag = (0..mesh.len()).map(|i| mesh.cells[i].volume / (dt * dt * rho[i] * c[i] * c[i])).collect();
        let mut start = Vec::with_capacity(mesh.len() + 1);
        let mut cols = Vec::new();
        let mut coef = Vec::new();
        start.push(0);
        for (i, cell) in mesh.cells.iter().enumerate() {
            for f in &cell.facets {
                let j = f.neighbor;
                if j == i {
                    continue;
                }
                cols.push(j);
                coef.push((f.area / f.distance) * (0.5 / rho[i] + 0.5 / rho[j]));
            }
            start.push(cols.len());
        }
        Self { diag, start, cols, coef }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn is_singular(&self) -> bool {
        self.diag.iter().all(|&d| d == 0.0)
    }

    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut s = self.diag[i] * p[i];
            for k in self.start[i]..self.start[i + 1] {
                s += self.coef[k] * (p[i] - p[self.cols[k]]);
            }
            *o = s;
        });
    }

    /// The same operator as an explicit sparse matrix.
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.len();
        let mut start = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(self.cols.len() + n);
        let mut vals = Vec::with_capacity(self.cols.len() + n);
        start.push(0);
        for i in 0..n {
            let row = self.start[i]..self.start[i + 1];
            cols.push(i);
            vals.push(self.diag[i] + self.coef[row.clone()].iter().sum::<f64>());
            for k in row {
                cols.push(self.cols[k]);
                vals.push(-self.coef[k]);
            }
            start.push(cols.len());
        }
        CsrMatrix { start, cols, vals }
    }
}

/// History length of the fallback Anderson mixing.
const ANDERSON_DEPTH: usize = 8;
/// Change ratio between fixed-point iterations counted as a stall.
const STALL_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PressureSolution {
    pub p: Vec<f64>,
    pub cg_iterations: usize,
    pub fixed_point_iterations: usize,
}

/// Solves for the predicted pressure on the advected mesh. Expects `state`
/// to hold the new density, the previous pressure and the previous sound
/// speed.
pub fn pressure_solve(
    state: &FlowState,
    mesh: &Mesh,
    fluid: &Fluid,
    vt: &[Vec2],
    dt: f64,
    controls: &StepControls,
) -> Result<PressureSolution> {
    let n = state.len();
    let sys = PressureSystem::assemble(mesh, &state.rho, &state.c, dt);
    let singular = sys.is_singular();
    let amg = Amg::new(sys.to_csr());
    let div = dual_divergence(mesh, vt);
    let wall = wall_volume_rate(mesh);
    let base: Vec<f64> = (0..n)
        .map(|i| sys.diag[i] * state.p[i] - mesh.cells[i].volume * (div[i] + wall[i]) / dt)
        .collect();
    let p0_mean = state.p.iter().sum::<f64>() / n as f64;
    let rho_max = state.rho.iter().copied().fold(0.0, f64::max);
    let v_max = vt.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let p_floor = state.p.iter().map(|p| p.abs()).fold(0.0, f64::max).max(
        rho_max * (v_max * v_max + fluid.gravity.norm() * mesh.domain.diameter()),
    );

    // Magnitude of the individual flux terms, against which a net imbalance
    // of a singular system is judged.
    let flux_scale: f64 = (0..n)
        .map(|i| {
            let c = &mesh.cells[i];
            let inner: f64 = c
                .facets
                .iter()
                .map(|f| {
                    (f.area / f.distance)
                        * (vt[i].norm() * (f.centroid - mesh.seeds[i]).norm()
                            + vt[f.neighbor].norm() * (f.centroid - f.neighbor_pos).norm())
                })
                .sum();
            (inner + c.volume * wall[i].abs()) / dt
        })
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    // On skewed meshes the lagged correction can overshoot (an eigenvalue of
    // the iteration below -1) or nearly cancel the compact part (close to
    // +1). Either shows up as a stalled change, after which Anderson mixing
    // takes over.
    let mut dagger = state.p.clone();
    let mut cg_total = 0;
    let mut mixing: Option<Anderson> = None;
    let (mut last_change, mut stalled, mut rel_change) = (f64::INFINITY, 0, f64::NAN);
    for it in 1..=controls.fp_max_iter {
        let q: Vec<Vec2> = pressure_gradient(mesh, &dagger, &state.rho, &fluid.gravity)
            .iter()
            .zip(&state.rho)
            .map(|(g, r)| g / *r)
            .collect();
        let mut rhs: Vec<f64> = mesh
            .cells
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut s = base[i];
                for f in &c.facets {
                    let mid = 0.5 * (mesh.seeds[i] + f.neighbor_pos);
                    s += (f.area / f.distance) * (q[i] - q[f.neighbor]).dot(&(f.centroid - mid));
                }
                s
            })
            .collect();
        if singular {
            let total: f64 = rhs.iter().sum();
            if total.abs() > 1e-8 * flux_scale {
                return Err(Error::SingularSystem(total / flux_scale));
            }
            let mean = total / n as f64;
            rhs.iter_mut().for_each(|r| *r -= mean);
        }
        let mut p = dagger.clone();
        let CgReport { iterations, .. } = pcg_with(
            "pressure CG",
            |x, out| sys.apply(x, out),
            &rhs,
            &mut p,
            |r, z| amg.apply(r, z),
            controls.cg_tol,
            controls.cg_max_iter,
        )?;
        cg_total += iterations;
        if singular {
            let shift = p0_mean - p.iter().sum::<f64>() / n as f64;
            p.iter_mut().for_each(|x| *x += shift);
        }
        let change = p.iter().zip(&dagger).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = p.iter().map(|x| x.abs()).fold(p_floor, f64::max);
        rel_change = change / scale;
        if change <= controls.fp_tol * scale {
            return Ok(PressureSolution { p, cg_iterations: cg_total, fixed_point_iterations: it });
        }
        stalled = if change > STALL_RATIO * last_change { stalled + 1 } else { 0 };
        last_change = change;
        if stalled >= 2 && mixing.is_none() {
            mixing = Some(Anderson::new(ANDERSON_DEPTH));
        }
        dagger = match &mut mixing {
            Some(acc) => acc.next(&dagger, p),
            None => p,
        };
    }
    Err(Error::SolverDiverged { solver: "pressure fixed point", iterations: controls.fp_max_iter, residual: rel_change })
}

/// Semi-implicit reversible substep. Moves the seeds with the incoming
/// velocity, rebuilds the mesh and returns it.
pub fn reversible_step(
    state: &mut FlowState,
    mesh: &Mesh,
    fluid: &Fluid,
    dt: f64,
    controls: &StepControls,
) -> Result<(Mesh, StepStats)> {
    let domain = mesh.domain.advanced(dt)?;
    let x1: Vec<Vec2> = (0..state.len()).map(|i| domain.confine(state.x[i] + dt * state.v[i])).collect();
    let mesh1 = build_mesh(&x1, &domain)?;
    state.x = x1;
    set_density(state, &mesh1);
    let (vt, div_s) = predict_velocity(state, &mesh1, fluid, dt);
    let sol = pressure_solve(state, &mesh1, fluid, &vt, dt, controls)?;
    let pt = sol.p;
    let grad = pressure_gradient(&mesh1, &pt, &state.rho, &fluid.gravity);
    let v1: Vec<Vec2> = (0..state.len()).map(|i| vt[i] - dt * grad[i] / state.rho[i]).collect();
    let div1 = dual_divergence(&mesh1, &v1);
    let wall = wall_volume_rate(&mesh1);
    for i in 0..state.len() {
        let power = -grad[i].dot(&v1[i]) - pt[i] * (div1[i] + wall[i]) + div_s[i].dot(&v1[i]);
        state.e[i] += dt * power / state.rho[i];
    }
    state.v = v1;
    state.p = pt;
    state.update_thermo(&mesh1, fluid)?;
    Ok((mesh1, StepStats { viscous_cg: 0, pressure_cg: sol.cg_iterations, fixed_point: sol.fixed_point_iterations }))
}

/// One full step `φ_rev ∘ φ_irr` of size `dt`; returns the advected mesh.
pub fn step(
    state: &mut FlowState,
    mesh: &Mesh,
    fluid: &Fluid,
    dt: f64,
    controls: &StepControls,
) -> Result<(Mesh, StepStats)> {
    let viscous_cg = match controls.viscous {
        ViscousMode::Explicit => {
            irreversible_step_explicit(state, mesh, fluid, dt)?;
            0
        }
        ViscousMode::Implicit => irreversible_step_implicit(state, mesh, fluid, dt, controls)?,
    };
    state.update_thermo(mesh, fluid)?;
    let (mesh1, mut stats) = reversible_step(state, mesh, fluid, dt, controls)?;
    stats.viscous_cg = viscous_cg;
    Ok((mesh1, stats))
}
