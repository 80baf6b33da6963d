//! Cell state, materials and the constitutive pieces of the stress tensor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::grid::PointGrid;
use crate::voronoi::Mesh;

/// Normalization of the 2D Wendland quintic kernel.
pub const WENDLAND_ALPHA: f64 = 7.0 / std::f64::consts::PI;

/// Smoothing radius in units of the mean spacing.
pub const DEFAULT_SMOOTHING_RATIO: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Eos {
    IdealGas { gamma: f64 },
    /// Linearized Tait law `p = p_ref + c0² (ρ − ρ0)`.
    Tait { rho0: f64, c0: f64, p_ref: f64 },
    /// Infinite sound speed; pressure comes from the solver.
    Incompressible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub eos: Eos,
    pub viscosity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EosState {
    /// `None` for incompressible material.
    pub pressure: Option<f64>,
    /// `f64::INFINITY` for incompressible material.
    pub sound_speed: f64,
}

impl Material {
    pub fn new(eos: Eos, viscosity: f64) -> Result<Self> {
        let m = Self { eos, viscosity };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.to_string()));
        if !(self.viscosity >= 0.0) {
            return bad("viscosity must be non-negative");
        }
        match self.eos {
            Eos::IdealGas { gamma } if !(gamma > 1.0) => bad("adiabatic index must exceed 1"),
            Eos::Tait { rho0, c0, .. } if !(c0 > 0.0 && rho0 > 0.0) => bad("Tait parameters must be positive"),
            _ => Ok(()),
        }
    }

    pub fn is_incompressible(&self) -> bool {
        matches!(self.eos, Eos::Incompressible)
    }

    pub fn is_ideal_gas(&self) -> bool {
        matches!(self.eos, Eos::IdealGas { .. })
    }

    /// Specific internal energy that yields pressure `p` at density `rho`.
    /// Only the ideal gas depends on it; other laws return zero.
    pub fn internal_energy(&self, rho: f64, p: f64) -> f64 {
        match self.eos {
            Eos::IdealGas { gamma } => p / ((gamma - 1.0) * rho),
            _ => 0.0,
        }
    }
}

/// Evaluates pressure and sound speed. Errors carry cell index 0; callers
/// relabel with [`Error::at_cell`].
pub fn eos_eval(material: &Material, rho: f64, eps: f64) -> Result<EosState> {
    if !(rho > 0.0) {
        return Err(Error::NonPhysicalState { cell: 0, reason: format!("density {rho:e}") });
    }
    match material.eos {
        Eos::IdealGas { gamma } => {
            if !(eps > 0.0) {
                return Err(Error::NonPhysicalState { cell: 0, reason: format!("internal energy {eps:e}") });
            }
            let p = (gamma - 1.0) * rho * eps;
            Ok(EosState { pressure: Some(p), sound_speed: (gamma * p / rho).sqrt() })
        }
        Eos::Tait { rho0, c0, p_ref } => Ok(EosState { pressure: Some(p_ref + c0 * c0 * (rho - rho0)), sound_speed: c0 }),
        Eos::Incompressible => Ok(EosState { pressure: None, sound_speed: f64::INFINITY }),
    }
}

impl Error {
    pub fn at_cell(self, i: usize) -> Self {
        match self {
            Error::NonPhysicalState { reason, .. } => Error::NonPhysicalState { cell: i, reason },
            other => other,
        }
    }
}

/// Physical parameters shared by all cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluid {
    /// Material of color 0 and color 1.
    pub materials: [Material; 2],
    pub gravity: Vec2,
    pub sigma: f64,
    /// H / h.
    pub smoothing_ratio: f64,
    pub artificial_viscosity: bool,
}

impl Fluid {
    pub fn single(material: Material) -> Self {
        Self {
            materials: [material, material],
            gravity: Vec2::zeros(),
            sigma: 0.0,
            smoothing_ratio: DEFAULT_SMOOTHING_RATIO,
            artificial_viscosity: false,
        }
    }

    pub fn material(&self, color: u8) -> &Material {
        &self.materials[color as usize]
    }

    pub fn smoothing_radius(&self, mesh: &Mesh) -> f64 {
        self.smoothing_ratio * mesh.mean_spacing()
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.materials {
            m.validate()?;
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidParameter("surface tension must be non-negative".into()));
        }
        if !(self.smoothing_ratio > 0.0) {
            return Err(Error::InvalidParameter("smoothing ratio must be positive".into()));
        }
        Ok(())
    }
}

/// Struct-of-arrays cell state. Mass is fixed between remaps.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub x: Vec<Vec2>,
    pub rho: Vec<f64>,
    pub v: Vec<Vec2>,
    /// Specific total energy.
    pub e: Vec<f64>,
    pub color: Vec<u8>,
    pub mass: Vec<f64>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub eps: Vec<f64>,
}

impl FlowState {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Builds a state on `mesh` from pointwise density, velocity, pressure
    /// and color. Total energy is assembled from the internal energy that
    /// reproduces `p` (ideal gas) plus kinetic, potential and tensile parts.
    pub fn from_primitives(
        mesh: &Mesh,
        fluid: &Fluid,
        rho: Vec<f64>,
        v: Vec<Vec2>,
        p: Vec<f64>,
        color: Vec<u8>,
    ) -> Result<Self> {
        let n = mesh.len();
        if rho.len() != n || v.len() != n || p.len() != n || color.len() != n {
            return Err(Error::InvalidParameter("field lengths differ from cell count".into()));
        }
        if let Some(i) = color.iter().position(|&c| c > 1) {
            return Err(Error::InvalidParameter(format!("color of cell {i} is not 0 or 1")));
        }
        let mass: Vec<f64> = rho.iter().zip(&mesh.cells).map(|(r, c)| r * c.volume).collect();
        let tension = tensile_energy(mesh, &color, fluid);
        let mut eps = vec![0.0; n];
        let mut e = vec![0.0; n];
        for i in 0..n {
            eps[i] = fluid.material(color[i]).internal_energy(rho[i], p[i]);
            e[i] = eps[i] + 0.5 * v[i].norm_squared() - fluid.gravity.dot(&mesh.seeds[i]) + tension[i];
        }
        let mut s = Self { x: mesh.seeds.clone(), rho, v, e, color, mass, p, c: vec![0.0; n], eps };
        s.update_thermo(mesh, fluid)?;
        Ok(s)
    }

    /// Refreshes ε, and p and c for compressible cells. Incompressible cells
    /// keep their solver pressure.
    pub fn update_thermo(&mut self, mesh: &Mesh, fluid: &Fluid) -> Result<()> {
        let tension = tensile_energy(mesh, &self.color, fluid);
        let out: Vec<Result<(f64, EosState)>> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let eps = self.e[i] - 0.5 * self.v[i].norm_squared() + fluid.gravity.dot(&self.x[i]) - tension[i];
                let m = fluid.material(self.color[i]);
                let st = eos_eval(m, self.rho[i], eps).map_err(|e| e.at_cell(i))?;
                Ok((eps, st))
            })
            .collect();
        for (i, r) in out.into_iter().enumerate() {
            let (eps, st) = r?;
            self.eps[i] = eps;
            self.c[i] = st.sound_speed;
            if let Some(p) = st.pressure {
                self.p[i] = p;
            }
        }
        Ok(())
    }

    pub fn total_mass(&self, color: Option<u8>) -> f64 {
        self.select(color).map(|i| self.mass[i]).sum()
    }

    pub fn total_momentum(&self, color: Option<u8>) -> Vec2 {
        self.select(color).map(|i| self.mass[i] * self.v[i]).sum()
    }

    pub fn total_energy(&self, color: Option<u8>) -> f64 {
        self.select(color).map(|i| self.mass[i] * self.e[i]).sum()
    }

    fn select(&self, color: Option<u8>) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| color.is_none_or(|c| self.color[i] == c))
    }
}

fn tensile_energy(mesh: &Mesh, color: &[u8], fluid: &Fluid) -> Vec<f64> {
    if fluid.sigma == 0.0 {
        return vec![0.0; mesh.len()];
    }
    let h = fluid.smoothing_radius(mesh);
    color_gradient(mesh, color, h).iter().map(|g| fluid.sigma * g.norm()).collect()
}

/// Wendland quintic kernel `w_H(r)`.
pub fn wendland(r: f64, h: f64) -> f64 {
    let q = r / h;
    if q >= 1.0 {
        return 0.0;
    }
    WENDLAND_ALPHA / (h * h) * (1.0 - q).powi(4) * (1.0 + 4.0 * q)
}

/// Gradient of `w_H(|x|)` with respect to `x`.
pub fn wendland_grad(x: &Vec2, h: f64) -> Vec2 {
    let q = x.norm() / h;
    if q >= 1.0 {
        return Vec2::zeros();
    }
    -20.0 * WENDLAND_ALPHA / h.powi(4) * (1.0 - q).powi(3) * x
}

/// SPH-style color gradient in difference form,
/// `Σ_j |ω_j| (C_j − C_i) ∇w_H(x_i − x_j)`. The difference removes the
/// kernel-truncation bias of the plain sum, vanishes identically in a single
/// phase and negates exactly under `C → 1 − C`.
pub fn color_gradient(mesh: &Mesh, color: &[u8], h: f64) -> Vec<Vec2> {
    if color.iter().all(|&c| c == color[0]) {
        return vec![Vec2::zeros(); mesh.len()];
    }
    let grid = PointGrid::new(&mesh.seeds, &mesh.domain, h);
    (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let xi = mesh.seeds[i];
            let ci = color[i] as f64;
            let mut g = Vec2::zeros();
            grid.visit_radius(&xi, h, |j, xj| {
                let dc = color[j] as f64 - ci;
                if dc != 0.0 {
                    g += mesh.cells[j].volume * dc * wendland_grad(&(xi - xj), h);
                }
            });
            g
        })
        .collect()
}

/// Smoothed color `C^H` evaluable anywhere in the domain, as a
/// Shepard-normalized kernel sum over cell colors.
pub struct SmoothedColor<'a> {
    mesh: &'a Mesh,
    color: &'a [u8],
    grid: PointGrid<'a>,
    h: f64,
}

impl<'a> SmoothedColor<'a> {
    pub fn new(mesh: &'a Mesh, color: &'a [u8], h: f64) -> Self {
        Self { mesh, color, grid: PointGrid::new(&mesh.seeds, &mesh.domain, h), h }
    }

    pub fn eval(&self, p: &Vec2) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        self.grid.visit_radius(p, self.h, |j, xj| {
            let w = self.mesh.cells[j].volume * wendland((p - xj).norm(), self.h);
            num += w * self.color[j] as f64;
            den += w;
        });
        if den > 0.0 {
            num / den
        } else {
            // No seed within H: fall back to the color of the nearest seed.
            let j = (0..self.mesh.len())
                .min_by(|&a, &b| {
                    (self.mesh.seeds[a] - p).norm_squared().total_cmp(&(self.mesh.seeds[b] - p).norm_squared())
                })
                .unwrap_or(0);
            self.color.get(j).map_or(0.0, |&c| c as f64)
        }
    }
}

/// Surface-tension stress `σ|g|(I − n⊗n)` with `n = g/|g|`; zero when
/// `|g| < 1e-8 / h`.
pub fn surface_stress(grad_c: &Vec2, sigma: f64, h: f64) -> Mat2 {
    let g = grad_c.norm();
    if sigma == 0.0 || g < 1e-8 / h {
        return Mat2::zeros();
    }
    let n = grad_c / g;
    sigma * g * (Mat2::identity() - n * n.transpose())
}

/// Stone–Norman artificial viscosity for strain `d` at resolution `dr`.
pub fn artificial_viscosity(rho: f64, d: &Mat2, dr: f64) -> f64 {
    let tr = d.trace();
    if tr < 0.0 {
        -dr * dr * rho * tr
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryKind, DomainPolygon};
    use crate::voronoi::build_mesh;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn air() -> Material {
        Material::new(Eos::IdealGas { gamma: 1.4 }, 0.0).unwrap()
    }

    #[test]
    fn ideal_gas_values() {
        let st = eos_eval(&air(), 1.0, 2.5e5).unwrap();
        assert_relative_eq!(st.pressure.unwrap(), 1e5, max_relative = 1e-14);
        assert_relative_eq!(st.sound_speed, (1.4e5f64).sqrt(), max_relative = 1e-14);
        let he = Material::new(Eos::IdealGas { gamma: 1.648 }, 0.0).unwrap();
        let eps = he.internal_energy(0.182, 1e5);
        assert_relative_eq!(eps, 8.4793e5, max_relative = 1e-4);
        assert_relative_eq!(eos_eval(&he, 0.182, eps).unwrap().pressure.unwrap(), 1e5, max_relative = 1e-13);
    }

    #[test]
    fn eos_errors_and_incompressible() {
        assert!(matches!(eos_eval(&air(), 1.0, -1.0), Err(Error::NonPhysicalState { .. })));
        assert!(matches!(eos_eval(&air(), 1.0, -1.0).map_err(|e| e.at_cell(7)), Err(Error::NonPhysicalState { cell: 7, .. })));
        let w = Material::new(Eos::Incompressible, 0.0).unwrap();
        let st = eos_eval(&w, 1000.0, 0.0).unwrap();
        assert!(st.pressure.is_none());
        assert!(st.sound_speed.is_infinite());
        assert_eq!(1.0 / (st.sound_speed * st.sound_speed), 0.0);
        assert!(Material::new(Eos::IdealGas { gamma: 1.0 }, 0.0).is_err());
        assert!(Material::new(Eos::Tait { rho0: 1.0, c0: 0.0, p_ref: 0.0 }, 0.0).is_err());
        assert!(Material::new(Eos::Incompressible, -1.0).is_err());
        let t = Material::new(Eos::Tait { rho0: 1000.0, c0: 1500.0, p_ref: 1e5 }, 0.0).unwrap();
        assert_relative_eq!(eos_eval(&t, 1001.0, 0.0).unwrap().pressure.unwrap(), 1e5 + 2.25e6);
    }

    #[test]
    fn wendland_values_and_unit_integral() {
        let h = 0.37;
        assert_relative_eq!(wendland(0.0, h), WENDLAND_ALPHA / (h * h));
        assert_eq!(wendland(h, h), 0.0);
        assert_eq!(wendland_grad(&Vec2::new(h, 0.0), h), Vec2::zeros());
        // Radial midpoint quadrature of 2π∫ r w(r) dr.
        let n = 200_000;
        let dr = h / n as f64;
        let integral: f64 = (0..n)
            .map(|k| {
                let r = (k as f64 + 0.5) * dr;
                2.0 * std::f64::consts::PI * r * wendland(r, h) * dr
            })
            .sum();
        assert_relative_eq!(integral, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn wendland_grad_matches_finite_differences() {
        let h = 1.3;
        let x = Vec2::new(0.31, -0.42);
        let d = 1e-6;
        let fd = Vec2::new(
            (wendland((x + Vec2::new(d, 0.0)).norm(), h) - wendland((x - Vec2::new(d, 0.0)).norm(), h)) / (2.0 * d),
            (wendland((x + Vec2::new(0.0, d)).norm(), h) - wendland((x - Vec2::new(0.0, d)).norm(), h)) / (2.0 * d),
        );
        assert!((fd - wendland_grad(&x, h)).norm() < 1e-7);
    }

    fn square_lattice(n: usize) -> Mesh {
        let d = DomainPolygon::rectangle_uniform(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), BoundaryKind::FreeSlip)
            .unwrap();
        let h = 2.0 / n as f64;
        let seeds: Vec<Vec2> = (0..n * n)
            .map(|k| Vec2::new(-1.0 + (k % n) as f64 * h + 0.5 * h, -1.0 + (k / n) as f64 * h + 0.5 * h))
            .collect();
        build_mesh(&seeds, &d).unwrap()
    }

    #[test]
    fn color_gradient_cases() {
        let m = square_lattice(30);
        let h = 3.0 * m.mean_spacing();
        let zero = vec![0u8; m.len()];
        assert!(color_gradient(&m, &zero, h).iter().all(|g| *g == Vec2::zeros()));

        let planar: Vec<u8> = m.seeds.iter().map(|x| (x.x > 0.0) as u8).collect();
        let g = color_gradient(&m, &planar, h);
        let mut checked = 0;
        for (i, x) in m.seeds.iter().enumerate() {
            // Kernel support must not reach the top or bottom wall.
            if x.x.abs() < h && x.y.abs() < 1.0 - h && g[i].norm() > 0.0 {
                let angle = g[i].y.atan2(g[i].x).abs().to_degrees();
                assert!(angle < 5.0, "cell {i} angle {angle}");
                checked += 1;
            }
        }
        assert!(checked > 0);

        let swapped: Vec<u8> = planar.iter().map(|c| 1 - c).collect();
        let gs = color_gradient(&m, &swapped, h);
        assert!(g.iter().zip(&gs).all(|(a, b)| *a == -*b));

        // Single C = 1 cell near the middle of the lattice.
        let centre = m.seeds.iter().position(|x| (x - Vec2::new(1.0 / 30.0, 1.0 / 30.0)).norm() < 1e-9).unwrap();
        let mut single = vec![0u8; m.len()];
        single[centre] = 1;
        let gc = color_gradient(&m, &single, h);
        assert!(gc[centre].norm() < 1e-10 * gc.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn smoothed_color_limits() {
        let m = square_lattice(20);
        let h = 3.0 * m.mean_spacing();
        let planar: Vec<u8> = m.seeds.iter().map(|x| (x.x > 0.0) as u8).collect();
        let s = SmoothedColor::new(&m, &planar, h);
        assert_eq!(s.eval(&Vec2::new(-0.8, 0.1)), 0.0);
        assert_relative_eq!(s.eval(&Vec2::new(0.8, 0.1)), 1.0, max_relative = 1e-14);
        assert_relative_eq!(s.eval(&Vec2::new(0.0, 0.05)), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn surface_stress_cases() {
        assert_eq!(surface_stress(&Vec2::zeros(), 2.0, 0.1), Mat2::zeros());
        let s = surface_stress(&Vec2::new(3.0, 0.0), 2.0, 0.1);
        assert_relative_eq!(s, Mat2::new(0.0, 0.0, 0.0, 6.0));
    }

    #[test]
    fn artificial_viscosity_cases() {
        assert_eq!(artificial_viscosity(1.0, &Mat2::identity(), 0.1), 0.0);
        let d = Mat2::new(-1.0, 0.0, 0.0, -2.0);
        assert_relative_eq!(artificial_viscosity(2.0, &d, 0.1), 0.01 * 2.0 * 3.0, max_relative = 1e-14);
        let rot = Mat2::new(0.0, -1.0, 1.0, 0.0);
        assert_eq!(artificial_viscosity(2.0, &(0.5 * (rot + rot.transpose())), 0.1), 0.0);
    }

    proptest! {
        #[test]
        fn surface_stress_is_psd_projector(gx in -1e3f64..1e3, gy in -1e3f64..1e3, sigma in 0.0f64..100.0) {
            let g = Vec2::new(gx, gy);
            prop_assume!(g.norm() > 1e-3);
            let s = surface_stress(&g, sigma, 1.0);
            let n = g / g.norm();
            let scale = sigma * g.norm();
            prop_assert!((s - s.transpose()).norm() <= 1e-12 * (1.0 + scale));
            prop_assert!((s * n).norm() <= 1e-12 * (1.0 + scale));
            prop_assert!((s.trace() - scale).abs() <= 1e-12 * (1.0 + scale));
            let eig = s.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            prop_assert!(lo.abs() <= 1e-12 * (1.0 + scale));
            prop_assert!((hi - scale).abs() <= 1e-12 * (1.0 + scale));
        }

        #[test]
        fn ideal_gas_pressure_increases_with_density(rho in 0.01f64..100.0, eps in 1.0f64..1e6, gamma in 1.01f64..3.0) {
            let m = Material::new(Eos::IdealGas { gamma }, 0.0).unwrap();
            let d = 1e-6 * rho;
            let hi = eos_eval(&m, rho + d, eps).unwrap().pressure.unwrap();
            let lo = eos_eval(&m, rho - d, eps).unwrap().pressure.unwrap();
            prop_assert!((hi - lo) / (2.0 * d) > 0.0);
        }

        #[test]
        fn wendland_is_nonnegative_and_decreasing(r1 in 0.0f64..2.0, r2 in 0.0f64..2.0) {
            let (a, b) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            prop_assert!(wendland(a, 1.0) >= wendland(b, 1.0));
            prop_assert!(wendland(b, 1.0) >= 0.0);
        }
    }
}
