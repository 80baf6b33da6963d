//! Run configuration. Every key except `scenario` is optional and falls
//! back to the scenario's built-in value, so a minimal file reads
//!
//! ```toml
//! scenario = "circular_patch"
//! resolution = 10
//! t_end = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use voroflow::bench::{build_scenario, default_resolution, Scenario};
use voroflow::{DtPolicy, ViscousMode};

use crate::CliError;

pub const MIN_RESOLUTION: f64 = 4.0;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    /// Seeds per reference length.
    pub resolution: Option<f64>,
    pub t_end: Option<f64>,
    /// Jitter seed.
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Simulated time between snapshots.
    pub snapshot_interval: Option<f64>,
    /// Set to false to write diagnostics only.
    pub snapshots: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub cfl: Option<f64>,
    pub v_ref: Option<f64>,
    /// Fixed step; replaces the CFL rule.
    pub dt: Option<f64>,
    pub dt_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub cg_tol: Option<f64>,
    pub cg_max_iter: Option<usize>,
    pub fp_tol: Option<f64>,
    pub fp_max_iter: Option<usize>,
    /// "explicit" or "implicit".
    pub viscous: Option<String>,
    pub remap_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub sigma: Option<f64>,
    /// Dynamic viscosity of phase 0 and phase 1.
    pub viscosity: Option<[f64; 2]>,
    pub artificial_viscosity: Option<bool>,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub seed: u64,
    pub out: PathBuf,
    pub snapshot_interval: f64,
    pub snapshots: bool,
    pub remap_threshold: f64,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check(ok: bool, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(bad(msg))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| bad(format!("cannot parse configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read configuration {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let resolution = match self.resolution {
            Some(r) => r,
            None => default_resolution(&self.scenario)?,
        };
        check(resolution >= MIN_RESOLUTION && resolution.is_finite(), "resolution must be at least 4")?;
        let mut sc = build_scenario(&self.scenario, resolution)?;

        if let Some(t) = self.t_end {
            check(t.is_finite() && t > sc.t_start, "t_end must lie after the scenario start time")?;
            sc.t_end = t;
        }
        let snapshot_interval = self.output.snapshot_interval.unwrap_or(sc.output_interval);
        check(snapshot_interval > 0.0 && snapshot_interval.is_finite(), "snapshot_interval must be positive")?;

        let t = &self.time;
        if let Some(dt) = t.dt {
            check(t.cfl.is_none() && t.v_ref.is_none(), "time.dt cannot be combined with time.cfl or time.v_ref")?;
            check(dt > 0.0 && dt.is_finite(), "time.dt must be positive")?;
            sc.controls.dt = DtPolicy::Fixed(dt);
        } else if let DtPolicy::Cfl { cfl, v_ref, acoustic } = sc.controls.dt {
            let cfl = t.cfl.unwrap_or(cfl);
            let v_ref = t.v_ref.unwrap_or(v_ref);
            check(cfl > 0.0 && cfl <= 1.0, "time.cfl must lie in (0, 1]")?;
            check(v_ref > 0.0 && v_ref.is_finite(), "time.v_ref must be positive")?;
            sc.controls.dt = DtPolicy::Cfl { cfl, v_ref, acoustic };
        }
        if let Some(m) = t.dt_max {
            check(m > 0.0, "time.dt_max must be positive")?;
            sc.controls.dt_max = m;
        }

        let s = &self.solver;
        if let Some(tol) = s.cg_tol {
            check(tol > 0.0 && tol < 1.0, "solver.cg_tol must lie in (0, 1)")?;
            sc.controls.cg_tol = tol;
        }
        if let Some(tol) = s.fp_tol {
            check(tol > 0.0 && tol < 1.0, "solver.fp_tol must lie in (0, 1)")?;
            sc.controls.fp_tol = tol;
        }
        if let Some(n) = s.cg_max_iter {
            check(n >= 1, "solver.cg_max_iter must be at least 1")?;
            sc.controls.cg_max_iter = n;
        }
        if let Some(n) = s.fp_max_iter {
            check(n >= 1, "solver.fp_max_iter must be at least 1")?;
            sc.controls.fp_max_iter = n;
        }
        if let Some(mode) = &s.viscous {
            sc.controls.viscous = match mode.as_str() {
                "explicit" => ViscousMode::Explicit,
                "implicit" => ViscousMode::Implicit,
                other => return Err(bad(format!("solver.viscous must be 'explicit' or 'implicit', not '{other}'"))),
            };
        }
        let remap_threshold = s.remap_threshold.unwrap_or(voroflow::remap::DEFAULT_Q_THRESHOLD);
        check(remap_threshold > 0.0 && remap_threshold < 1.0, "solver.remap_threshold must lie in (0, 1)")?;

        let p = &self.physics;
        if let Some(sigma) = p.sigma {
            check(sigma >= 0.0 && sigma.is_finite(), "physics.sigma must be non-negative")?;
            sc.fluid.sigma = sigma;
        }
        if let Some(mu) = p.viscosity {
            check(mu.iter().all(|m| *m >= 0.0 && m.is_finite()), "physics.viscosity must be non-negative")?;
            for (m, v) in sc.fluid.materials.iter_mut().zip(mu) {
                m.viscosity = v;
            }
        }
        if let Some(av) = p.artificial_viscosity {
            sc.fluid.artificial_viscosity = av;
        }
        sc.fluid.validate()?;
        sc.controls.validate()?;

        Ok(Resolved {
            scenario: sc,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            out: self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            snapshot_interval,
            snapshots: self.output.snapshots.unwrap_or(true),
            remap_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Resolved, CliError> {
        RunConfig::from_toml(text)?.resolve()
    }

    #[test]
    fn three_line_config_uses_scenario_defaults() {
        let r = resolve("scenario = \"dam_break\"\nresolution = 10\nt_end = 0.2\n").unwrap();
        assert_eq!(r.scenario.resolution, 10.0);
        assert_eq!(r.scenario.t_end, 0.2);
        assert_eq!(r.seed, DEFAULT_SEED);
        assert_eq!(r.snapshot_interval, r.scenario.output_interval);
        assert!(r.snapshots);
    }

    #[test]
    fn overrides_are_applied() {
        let r = resolve(
            r#"
            scenario = "rising_bubble_1"
            seed = 7
            [time]
            cfl = 0.2
            dt_max = 1e-3
            [solver]
            viscous = "explicit"
            fp_tol = 1e-8
            [physics]
            sigma = 1.0
            viscosity = [0.5, 2.0]
            "#,
        )
        .unwrap();
        let sc = &r.scenario;
        assert!(matches!(sc.controls.dt, DtPolicy::Cfl { cfl, .. } if cfl == 0.2));
        assert_eq!(sc.controls.dt_max, 1e-3);
        assert_eq!(sc.controls.viscous, ViscousMode::Explicit);
        assert_eq!(sc.controls.fp_tol, 1e-8);
        assert_eq!(sc.fluid.sigma, 1.0);
        assert_eq!(sc.fluid.materials[1].viscosity, 2.0);
        assert_eq!(r.seed, 7);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "scenario = \"circular_patch\"\nresolution = 3",
            "scenario = \"circular_patch\"\n[output]\nsnapshot_interval = 0",
            "scenario = \"circular_patch\"\n[physics]\nsigma = -1",
            "scenario = \"circular_patch\"\n[time]\ncfl = 2",
            "scenario = \"circular_patch\"\n[time]\ndt = 1e-3\ncfl = 0.3",
            "scenario = \"circular_patch\"\n[solver]\nviscous = \"semi\"",
            "scenario = \"circular_patch\"\nt_end = -1",
            "scenario = \"circular_patch\"\ncolour = 1",
            "resolution = 10",
        ] {
            assert!(matches!(resolve(text), Err(CliError::Config(_))), "{text}");
        }
        assert!(matches!(resolve("scenario = \"vortex\""), Err(CliError::Model(voroflow::Error::UnknownScenario(_)))));
    }
}
