//! Benchmark scenarios, analytic oracles and observables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, DomainPolygon, EdgeCondition, Vec2};
use crate::operators::gradient;
use crate::state::{Eos, FlowState, Fluid, Material, DEFAULT_SMOOTHING_RATIO};
use crate::stepper::{DtPolicy, StepControls, ViscousMode};
use crate::voronoi::{build_mesh, Mesh};

pub const SCENARIOS: [&str; 7] = [
    "circular_patch",
    "dam_break",
    "shock_bubble",
    "rotating_square",
    "rising_bubble_1",
    "rising_bubble_2",
    "shock_column",
];

pub const WATER_DENSITY: f64 = 1000.0;
pub const AIR_DENSITY: f64 = 1.25;

/// Dam-break column width `a` and height `b`.
pub const DAM_WIDTH: f64 = 1.0;
pub const DAM_HEIGHT: f64 = 2.0;
pub const DAM_GRAVITY: f64 = 9.8;

pub const BUBBLE_CENTER: Vec2 = Vec2::new(0.5, 0.5);
pub const BUBBLE_RADIUS: f64 = 0.25;

pub const PISTON_SPEED: f64 = 124.824;

/// Shock-column geometry and shock strength.
pub const COLUMN_HALF_WIDTH: f64 = 20e-3;
pub const COLUMN_RADIUS: f64 = 3.2e-3;
pub const COLUMN_MACH: f64 = 1.3;
pub const COLUMN_T_START: f64 = -1e-6;
/// Linearized Tait stiffness of the water column.
pub const WATER_SOUND_SPEED: f64 = 1500.0;
pub const ATMOSPHERE: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    CircularPatch,
    DamBreak,
    ShockBubble,
    RotatingSquare,
    RisingBubble { setup: u8 },
    ShockColumn,
}

/// A fully specified benchmark. Color 1 always marks the tracked body
/// (water patch, water column, helium bubble, air bubble, water cylinder).
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub kind: ScenarioKind,
    pub domain: DomainPolygon,
    /// Seeds per reference length.
    pub resolution: f64,
    pub reference_length: f64,
    /// Uniform seed jitter in units of the lattice spacing.
    pub jitter: f64,
    pub fluid: Fluid,
    pub controls: StepControls,
    pub t_start: f64,
    pub t_end: f64,
    pub output_interval: f64,
}

pub fn default_resolution(name: &str) -> Result<f64> {
    Ok(match name {
        "circular_patch" => 20.0,
        "dam_break" => 40.0,
        "shock_bubble" => 8.0,
        "rotating_square" => 32.0,
        "rising_bubble_1" | "rising_bubble_2" => 20.0,
        "shock_column" => 8.0,
        _ => return Err(Error::UnknownScenario(name.to_string())),
    })
}

fn incompressible(mu: f64) -> Material {
    Material { eos: Eos::Incompressible, viscosity: mu }
}

fn ideal_gas(gamma: f64) -> Material {
    Material { eos: Eos::IdealGas { gamma }, viscosity: 0.0 }
}

fn cfl(v_ref: f64, acoustic: bool, viscous: ViscousMode) -> StepControls {
    StepControls { dt: DtPolicy::Cfl { cfl: 0.4, v_ref, acoustic }, viscous, ..Default::default() }
}

fn two_phase(phase0: Material, phase1: Material, gravity: Vec2, sigma: f64, artificial_viscosity: bool) -> Fluid {
    Fluid { materials: [phase0, phase1], gravity, sigma, smoothing_ratio: DEFAULT_SMOOTHING_RATIO, artificial_viscosity }
}

pub fn build_scenario(name: &str, resolution: f64) -> Result<Scenario> {
    if !(resolution >= 1.0 && resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolution {resolution} must be at least 1")));
    }
    let rect = |min: Vec2, max: Vec2, kind| DomainPolygon::rectangle_uniform(min, max, kind);
    let s = match name {
        "circular_patch" => Scenario {
            name: "circular_patch",
            kind: ScenarioKind::CircularPatch,
            domain: rect(Vec2::new(-1.5, -3.0), Vec2::new(1.5, 3.0), BoundaryKind::FreeSlip)?,
            resolution,
            reference_length: 1.0,
            jitter: 0.05,
            fluid: two_phase(incompressible(0.0), incompressible(0.0), Vec2::zeros(), 0.0, false),
            controls: cfl(1.0, false, ViscousMode::Explicit),
            t_start: 0.0,
            t_end: 3.0,
            output_interval: 0.1,
        },
        "dam_break" => Scenario {
            name: "dam_break",
            kind: ScenarioKind::DamBreak,
            domain: rect(Vec2::zeros(), Vec2::new(4.0, 3.0), BoundaryKind::NoSlip)?,
            resolution,
            reference_length: 1.0,
            jitter: 0.05,
            fluid: two_phase(
                incompressible(3.7e-5),
                incompressible(8.9e-4),
                Vec2::new(0.0, -DAM_GRAVITY),
                0.0,
                false,
            ),
            controls: cfl((DAM_GRAVITY * DAM_HEIGHT).sqrt(), false, ViscousMode::Explicit),
            t_start: 0.0,
            t_end: 1.0,
            output_interval: 0.05,
        },
        "shock_bubble" => {
            let wall = EdgeCondition::new(BoundaryKind::FreeSlip);
            let piston = EdgeCondition::moving(BoundaryKind::FreeSlip, Vec2::new(-PISTON_SPEED, 0.0));
            Scenario {
                name: "shock_bubble",
                kind: ScenarioKind::ShockBubble,
                domain: DomainPolygon::rectangle(Vec2::zeros(), Vec2::new(0.65, 0.178), [wall, piston, wall, wall])?,
                resolution,
                reference_length: 0.025,
                jitter: 0.05,
                fluid: two_phase(ideal_gas(1.4), ideal_gas(1.648), Vec2::zeros(), 0.0, true),
                controls: cfl(PISTON_SPEED, true, ViscousMode::Implicit),
                t_start: 0.0,
                t_end: 1.6e-3,
                output_interval: 1e-4,
            }
        }
        "rotating_square" => Scenario {
            name: "rotating_square",
            kind: ScenarioKind::RotatingSquare,
            domain: rect(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0), BoundaryKind::FreeSlip)?,
            resolution,
            reference_length: 1.0,
            jitter: 0.05,
            fluid: two_phase(incompressible(0.0), incompressible(0.0), Vec2::zeros(), 0.0, false),
            controls: cfl(1.0, false, ViscousMode::Explicit),
            t_start: 0.0,
            t_end: 1.8,
            output_interval: 0.1,
        },
        "rising_bubble_1" | "rising_bubble_2" => {
            let setup = if name.ends_with('1') { 1 } else { 2 };
            let (mu_air, sigma) = if setup == 1 { (1.0, 24.5) } else { (0.1, 1.96) };
            let slip = EdgeCondition::new(BoundaryKind::FreeSlip);
            let stick = EdgeCondition::new(BoundaryKind::NoSlip);
            let fluid = two_phase(incompressible(10.0), incompressible(mu_air), Vec2::new(0.0, -0.98), sigma, false);
            Scenario {
                name: if setup == 1 { "rising_bubble_1" } else { "rising_bubble_2" },
                kind: ScenarioKind::RisingBubble { setup },
                domain: DomainPolygon::rectangle(Vec2::zeros(), Vec2::new(1.0, 2.0), [stick, slip, stick, slip])?,
                resolution,
                reference_length: BUBBLE_RADIUS,
                jitter: 0.05,
                fluid,
                controls: cfl(0.25, false, ViscousMode::Implicit),
                t_start: 0.0,
                t_end: 3.0,
                output_interval: 0.1,
            }
        }
        "shock_column" => {
            let air = ideal_gas(1.4);
            let pre = GasState { rho: 1.18, u: 0.0, p: ATMOSPHERE };
            let post = normal_shock_state(COLUMN_MACH, 1.4, pre)?;
            let wall = EdgeCondition::new(BoundaryKind::FreeSlip);
            let piston = EdgeCondition::moving(BoundaryKind::FreeSlip, Vec2::new(post.u, 0.0));
            let d = COLUMN_HALF_WIDTH;
            let water = Material {
                eos: Eos::Tait { rho0: 998.2, c0: WATER_SOUND_SPEED, p_ref: ATMOSPHERE },
                viscosity: 0.0,
            };
            Scenario {
                name: "shock_column",
                kind: ScenarioKind::ShockColumn,
                domain: DomainPolygon::rectangle(Vec2::new(-d, -d), Vec2::new(d, d), [wall, wall, wall, piston])?,
                resolution,
                reference_length: COLUMN_RADIUS,
                jitter: 0.05,
                fluid: two_phase(air, water, Vec2::zeros(), 0.072, true),
                controls: cfl(COLUMN_MACH * sound_speed(1.4, pre), true, ViscousMode::Implicit),
                t_start: COLUMN_T_START,
                t_end: 40e-6,
                output_interval: 2e-6,
            }
        }
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(s)
}

impl Scenario {
    pub fn spacing(&self) -> f64 {
        self.reference_length / self.resolution
    }

    /// Jittered Cartesian lattice filling the domain's bounding box.
    pub fn seeds(&self, rng_seed: u64) -> Vec<Vec2> {
        let (min, max) = self.domain.bounding_box();
        let h = self.spacing();
        let nx = ((max.x - min.x) / h).round().max(1.0) as usize;
        let ny = ((max.y - min.y) / h).round().max(1.0) as usize;
        let (hx, hy) = ((max.x - min.x) / nx as f64, (max.y - min.y) / ny as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let jx = self.jitter * (2.0 * rng.gen::<f64>() - 1.0);
                let jy = self.jitter * (2.0 * rng.gen::<f64>() - 1.0);
                out.push(Vec2::new(min.x + (i as f64 + 0.5 + jx) * hx, min.y + (j as f64 + 0.5 + jy) * hy));
            }
        }
        out
    }

    /// Phase of the point `x` in the initial configuration.
    pub fn color_at(&self, x: &Vec2) -> u8 {
        let inside = match self.kind {
            ScenarioKind::CircularPatch => x.norm() < 1.0,
            ScenarioKind::DamBreak => x.x < DAM_WIDTH && x.y < DAM_HEIGHT,
            ScenarioKind::ShockBubble => (x - Vec2::new(0.32, 0.089)).norm() < 0.025,
            ScenarioKind::RotatingSquare => x.x.abs() < 0.5 && x.y.abs() < 0.5,
            ScenarioKind::RisingBubble { .. } => (x - BUBBLE_CENTER).norm() < BUBBLE_RADIUS,
            ScenarioKind::ShockColumn => x.norm() < COLUMN_RADIUS,
        };
        u8::from(inside)
    }

    /// Initial density, velocity and pressure at `x` for phase `color`.
    pub fn primitives_at(&self, x: &Vec2, color: u8) -> (f64, Vec2, f64) {
        let body = color == 1;
        match self.kind {
            ScenarioKind::CircularPatch => {
                if body {
                    (WATER_DENSITY, 0.5 * Vec2::new(-x.x, x.y), 125.0 * (1.0 - x.norm_squared()))
                } else {
                    (AIR_DENSITY, Vec2::zeros(), 0.0)
                }
            }
            ScenarioKind::DamBreak => {
                let (top, g) = (3.0, DAM_GRAVITY);
                if body {
                    let surface = AIR_DENSITY * g * (top - DAM_HEIGHT);
                    (WATER_DENSITY, Vec2::zeros(), surface + WATER_DENSITY * g * (DAM_HEIGHT - x.y))
                } else {
                    (AIR_DENSITY, Vec2::zeros(), AIR_DENSITY * g * (top - x.y))
                }
            }
            ScenarioKind::ShockBubble => {
                let rho = if body { 0.182 } else { 1.0 };
                (rho, Vec2::zeros(), 1e5)
            }
            ScenarioKind::RotatingSquare => {
                if body {
                    (WATER_DENSITY, Vec2::new(-x.y, x.x), 0.0)
                } else {
                    (AIR_DENSITY, Vec2::zeros(), 0.0)
                }
            }
            ScenarioKind::RisingBubble { setup } => {
                let rho_air = if setup == 1 { 100.0 } else { 1.0 };
                let g = -self.fluid.gravity.y;
                let water_p = |y: f64| WATER_DENSITY * g * (2.0 - y);
                if body {
                    let center = water_p(BUBBLE_CENTER.y) + self.fluid.sigma / BUBBLE_RADIUS;
                    (rho_air, Vec2::zeros(), center + rho_air * g * (BUBBLE_CENTER.y - x.y))
                } else {
                    (WATER_DENSITY, Vec2::zeros(), water_p(x.y))
                }
            }
            ScenarioKind::ShockColumn => {
                if body {
                    (998.2, Vec2::zeros(), ATMOSPHERE)
                } else if x.x < self.shock_front() {
                    let post = normal_shock_state(COLUMN_MACH, 1.4, column_air()).expect("Mach above one");
                    (post.rho, Vec2::new(post.u, 0.0), post.p)
                } else {
                    (1.18, Vec2::zeros(), ATMOSPHERE)
                }
            }
        }
    }

    /// Initial shock position of the shock-column case: one microsecond of
    /// travel left of the cylinder.
    pub fn shock_front(&self) -> f64 {
        let w = COLUMN_MACH * sound_speed(1.4, column_air());
        -COLUMN_RADIUS + w * COLUMN_T_START
    }

    pub fn initial_state(&self, rng_seed: u64) -> Result<(Mesh, FlowState)> {
        self.fluid.validate()?;
        self.controls.validate()?;
        let mesh = build_mesh(&self.seeds(rng_seed), &self.domain)?;
        let color: Vec<u8> = mesh.seeds.iter().map(|x| self.color_at(x)).collect();
        let n = mesh.len();
        let (mut rho, mut v, mut p) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for (x, &c) in mesh.seeds.iter().zip(&color) {
            let (r, u, q) = self.primitives_at(x, c);
            rho.push(r);
            v.push(u);
            p.push(q);
        }
        let state = FlowState::from_primitives(&mesh, &self.fluid, rho, v, p, color)?;
        Ok((mesh, state))
    }

    pub fn observer(&self) -> Observer {
        let oracle = matches!(self.kind, ScenarioKind::CircularPatch)
            .then(|| patch_oracle(self.t_end.max(0.0) + 1.0, 1e-12));
        Observer { kind: self.kind, oracle }
    }
}

fn column_air() -> GasState {
    GasState { rho: 1.18, u: 0.0, p: ATMOSPHERE }
}

/// One-dimensional ideal-gas state: density, velocity along the shock
/// normal, pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

pub fn sound_speed(gamma: f64, s: GasState) -> f64 {
    (gamma * s.p / s.rho).sqrt()
}

/// State behind a normal shock running in `+x` at Mach `mach` relative to
/// the pre-shock gas.
pub fn normal_shock_state(mach: f64, gamma: f64, pre: GasState) -> Result<GasState> {
    if !(mach >= 1.0 && mach.is_finite()) {
        return Err(Error::InvalidMach(mach));
    }
    let m2 = mach * mach;
    let p_ratio = 1.0 + 2.0 * gamma * (m2 - 1.0) / (gamma + 1.0);
    let rho_ratio = (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0);
    let w = mach * sound_speed(gamma, pre);
    Ok(GasState { rho: pre.rho * rho_ratio, u: pre.u + w * (1.0 - 1.0 / rho_ratio), p: pre.p * p_ratio })
}

/// Relative residuals of the mass, momentum and energy jump conditions for
/// a shock moving at lab speed `shock_speed`.
pub fn rankine_hugoniot_residuals(gamma: f64, pre: GasState, post: GasState, shock_speed: f64) -> [f64; 3] {
    let (w1, w2) = (pre.u - shock_speed, post.u - shock_speed);
    let mass = (pre.rho * w1, post.rho * w2);
    let mom = (pre.p + pre.rho * w1 * w1, post.p + post.rho * w2 * w2);
    let h = |s: GasState| gamma / (gamma - 1.0) * s.p / s.rho;
    let energy = (h(pre) + 0.5 * w1 * w1, h(post) + 0.5 * w2 * w2);
    let r = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    [r(mass.0, mass.1), r(mom.0, mom.1), r(energy.0, energy.1)]
}

/// Semi-axes `a`, `b` and strain rate `ξ` of the elliptic patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSample {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub xi: f64,
}

fn patch_rhs(y: [f64; 3]) -> [f64; 3] {
    let [a, b, xi] = y;
    [-xi * a, xi * b, xi * xi * (a * a - b * b) / (a * a + b * b)]
}

fn rk4(y: [f64; 3], h: f64) -> [f64; 3] {
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let k1 = patch_rhs(y);
    let k2 = patch_rhs(add(y, k1, 0.5 * h));
    let k3 = patch_rhs(add(y, k2, 0.5 * h));
    let k4 = patch_rhs(add(y, k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Dense trajectory of the patch ODE.
#[derive(Debug, Clone)]
pub struct PatchOracle {
    pub samples: Vec<PatchSample>,
}

/// Integrates the patch ODE to `t_end` with step-doubling RK4, keeping the
/// local error estimate below `tol`. Steps are capped at `1e-3` so the
/// Hermite interpolant in [`PatchOracle::at`] is as accurate as the samples.
pub fn patch_oracle(t_end: f64, tol: f64) -> PatchOracle {
    let mut y = [1.0, 1.0, 0.5];
    let mut t = 0.0;
    let mut h: f64 = 1e-2;
    let mut samples = vec![PatchSample { t, a: y[0], b: y[1], xi: y[2] }];
    while t < t_end {
        h = h.min(1e-3).min(t_end - t);
        let big = rk4(y, h);
        let small = rk4(rk4(y, 0.5 * h), 0.5 * h);
        let err = (0..3).map(|i| (small[i] - big[i]).abs()).fold(0.0, f64::max) / 15.0;
        if err <= tol || h < 1e-10 {
            t += h;
            y = std::array::from_fn(|i| small[i] + (small[i] - big[i]) / 15.0);
            samples.push(PatchSample { t, a: y[0], b: y[1], xi: y[2] });
        }
        let factor = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }
    PatchOracle { samples }
}

impl PatchOracle {
    /// Cubic Hermite interpolation between stored samples.
    pub fn at(&self, t: f64) -> PatchSample {
        let s = &self.samples;
        let k = s.partition_point(|p| p.t <= t).clamp(1, s.len() - 1);
        let (p0, p1) = (s[k - 1], s[k]);
        let dt = p1.t - p0.t;
        if dt <= 0.0 {
            return p0;
        }
        let u = ((t - p0.t) / dt).clamp(0.0, 1.0);
        let (y0, y1) = ([p0.a, p0.b, p0.xi], [p1.a, p1.b, p1.xi]);
        let (f0, f1) = (patch_rhs(y0), patch_rhs(y1));
        let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
        let h10 = u.powi(3) - 2.0 * u * u + u;
        let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
        let h11 = u.powi(3) - u * u;
        let y: [f64; 3] = std::array::from_fn(|i| h00 * y0[i] + h10 * dt * f0[i] + h01 * y1[i] + h11 * dt * f1[i]);
        PatchSample { t, a: y[0], b: y[1], xi: y[2] }
    }

    pub fn velocity(&self, t: f64, x: &Vec2) -> Vec2 {
        let s = self.at(t);
        Vec2::new(-s.xi * x.x, s.xi * x.y)
    }

    pub fn pressure(&self, t: f64, x: &Vec2, rho: f64) -> f64 {
        let s = self.at(t);
        let q = (x.x / s.a).powi(2) + (x.y / s.b).powi(2) - 1.0;
        -s.xi * s.xi * rho / (1.0 / (s.a * s.a) + 1.0 / (s.b * s.b)) * q
    }
}

/// Magnitude of the density gradient per cell.
pub fn schlieren(mesh: &Mesh, rho: &[f64]) -> Vec<f64> {
    gradient(mesh, rho).iter().map(|g| g.norm()).collect()
}

/// Dimensionless dam-break time `sqrt(2 g t² / b)`.
pub fn dam_break_time(t: f64) -> f64 {
    (2.0 * DAM_GRAVITY * t * t / DAM_HEIGHT).sqrt()
}

const DAM_BREAK_FRONT_CSV: &str = include_str!("../data/dam_break_front.csv");

/// Experimental surge-front curve `(τ, x/a)` with `τ = t sqrt(2g/a)`.
pub fn dam_break_reference() -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(DAM_BREAK_FRONT_CSV.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let (tau, x): (f64, f64) = rec?;
        out.push((tau, x));
    }
    Ok(out)
}

/// Linear interpolation in a table sorted by abscissa; `None` outside it.
pub fn interpolate(table: &[(f64, f64)], x: f64) -> Option<f64> {
    let k = table.partition_point(|p| p.0 < x);
    if k == 0 {
        return (table.first()?.0 == x).then(|| table[0].1);
    }
    let (x1, y1) = *table.get(k)?;
    let (x0, y0) = table[k - 1];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Least-squares slope of `ln e` against `ln h`; `None` with fewer than two
/// usable points.
pub fn fit_order(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        h.iter().zip(e).filter(|(h, e)| **h > 0.0 && **e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Discrete L² errors of the patch against the oracle over water cells.
/// Pressure is measured relative to the mean air pressure, the level the
/// free-surface solution takes as zero.
pub fn patch_errors(state: &FlowState, mesh: &Mesh, oracle: &PatchOracle, t: f64) -> (f64, f64) {
    let (mut air_p, mut air_v) = (0.0, 0.0);
    for (i, c) in mesh.cells.iter().enumerate() {
        if state.color[i] == 0 {
            air_p += c.volume * state.p[i];
            air_v += c.volume;
        }
    }
    let p_inf = if air_v > 0.0 { air_p / air_v } else { 0.0 };
    let (mut ev, mut ep) = (0.0, 0.0);
    for (i, c) in mesh.cells.iter().enumerate() {
        if state.color[i] != 1 {
            continue;
        }
        let x = mesh.seeds[i];
        ev += c.volume * (state.v[i] - oracle.velocity(t, &x)).norm_squared();
        ep += c.volume * (state.p[i] - p_inf - oracle.pressure(t, &x, WATER_DENSITY)).powi(2);
    }
    (ev.sqrt(), ep.sqrt())
}

/// Mass-weighted centroid, mass-weighted velocity and volume of color 1.
pub fn body_metrics(state: &FlowState, mesh: &Mesh) -> (Vec2, Vec2, f64) {
    let (mut m, mut mx, mut mv, mut vol) = (0.0, Vec2::zeros(), Vec2::zeros(), 0.0);
    for (i, c) in mesh.cells.iter().enumerate() {
        if state.color[i] == 1 {
            m += state.mass[i];
            mx += state.mass[i] * mesh.seeds[i];
            mv += state.mass[i] * state.v[i];
            vol += c.volume;
        }
    }
    if m > 0.0 {
        (mx / m, mv / m, vol)
    } else {
        (Vec2::zeros(), Vec2::zeros(), 0.0)
    }
}

/// Largest vertex coordinates of color-1 cells, `(max x, max y)`.
pub fn body_extent(state: &FlowState, mesh: &Mesh) -> (f64, f64) {
    let mut ext = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, c) in mesh.cells.iter().enumerate() {
        if state.color[i] == 1 {
            for v in &c.vertices {
                ext = (ext.0.max(v.x), ext.1.max(v.y));
            }
        }
    }
    ext
}

/// Scenario-specific scalar observables for the diagnostics table.
#[derive(Debug, Clone)]
pub struct Observer {
    kind: ScenarioKind,
    oracle: Option<PatchOracle>,
}

impl Observer {
    pub fn names(&self) -> &'static [&'static str] {
        match self.kind {
            ScenarioKind::CircularPatch => &["l2_velocity_error", "l2_pressure_error"],
            ScenarioKind::DamBreak => &["front_x", "column_h", "dimensionless_time"],
            ScenarioKind::RisingBubble { .. } => &["centroid_y", "rise_velocity", "bubble_volume"],
            ScenarioKind::RotatingSquare => &["body_volume", "max_radius"],
            ScenarioKind::ShockBubble | ScenarioKind::ShockColumn => &["body_centroid_x", "body_volume", "max_schlieren"],
        }
    }

    pub fn evaluate(&self, state: &FlowState, mesh: &Mesh, t: f64) -> Vec<f64> {
        match self.kind {
            ScenarioKind::CircularPatch => {
                let oracle = self.oracle.as_ref().expect("patch observer carries an oracle");
                let (ev, ep) = patch_errors(state, mesh, oracle, t);
                vec![ev, ep]
            }
            ScenarioKind::DamBreak => {
                let (x, y) = body_extent(state, mesh);
                vec![x / DAM_WIDTH, y / DAM_HEIGHT, dam_break_time(t)]
            }
            ScenarioKind::RisingBubble { .. } => {
                let (c, v, vol) = body_metrics(state, mesh);
                vec![c.y, v.y, vol]
            }
            ScenarioKind::RotatingSquare => {
                let (_, _, vol) = body_metrics(state, mesh);
                let r = mesh
                    .cells
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| state.color[*i] == 1)
                    .flat_map(|(_, c)| c.vertices.iter().map(|v| v.norm()))
                    .fold(0.0, f64::max);
                vec![vol, r]
            }
            ScenarioKind::ShockBubble | ScenarioKind::ShockColumn => {
                let (c, _, vol) = body_metrics(state, mesh);
                let s = schlieren(mesh, &state.rho).into_iter().fold(0.0, f64::max);
                vec![c.x, vol, s]
            }
        }
    }
}
