//! Time-marching loop: Δt, viscous and pressure substeps, quality check and
//! optional remap.

use crate::error::Result;
use crate::remap::{remap_if_needed, RemapReport, DEFAULT_Q_THRESHOLD};
use crate::state::{FlowState, Fluid};
use crate::stepper::{compute_dt, step, StepControls, StepStats};
use crate::voronoi::{cell_quality, Mesh};

#[derive(Debug, Clone)]
pub struct Simulation {
    pub mesh: Mesh,
    pub state: FlowState,
    pub fluid: Fluid,
    pub controls: StepControls,
    pub t: f64,
    pub steps: usize,
    pub remaps: usize,
    pub q_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub stats: StepStats,
    /// Mesh quality after the step, before any remap.
    pub q_step: f64,
    pub remap: RemapReport,
}

impl StepRecord {
    /// Quality of the mesh the next step starts from.
    pub fn q_mesh(&self) -> f64 {
        self.remap.q_after
    }
}

impl Simulation {
    pub fn new(mesh: Mesh, state: FlowState, fluid: Fluid, controls: StepControls, t0: f64) -> Self {
        Self { mesh, state, fluid, controls, t: t0, steps: 0, remaps: 0, q_threshold: DEFAULT_Q_THRESHOLD }
    }

    pub fn quality(&self) -> f64 {
        cell_quality(&self.mesh).mesh
    }

    /// Advances one step, shortened so as not to pass `t_limit`.
    pub fn advance(&mut self, t_limit: f64) -> Result<StepRecord> {
        let mut dt = compute_dt(&self.state, &self.mesh, &self.fluid, &self.controls);
        let remaining = t_limit - self.t;
        // Split the last two steps evenly rather than ending on a sliver.
        if dt >= remaining * (1.0 - 1e-9) {
            dt = remaining;
        } else if 2.0 * dt > remaining {
            dt = 0.5 * remaining;
        }
        let (mesh1, stats) = step(&mut self.state, &self.mesh, &self.fluid, dt, &self.controls)?;
        let (remapped, report) = remap_if_needed(&mut self.state, &mesh1, &self.fluid, self.q_threshold)?;
        self.mesh = match remapped {
            Some(m) => {
                self.remaps += 1;
                m
            }
            None => mesh1,
        };
        self.t = if dt == remaining { t_limit } else { self.t + dt };
        self.steps += 1;
        Ok(StepRecord { t: self.t, dt, stats, q_step: report.q_before, remap: report })
    }

    /// Runs to `t_end`, handing every record to `observe`.
    pub fn run_until(&mut self, t_end: f64, mut observe: impl FnMut(&Self, &StepRecord) -> Result<()>) -> Result<()> {
        while self.t < t_end {
            let rec = self.advance(t_end)?;
            observe(self, &rec)?;
        }
        Ok(())
    }
}
