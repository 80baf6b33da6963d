//! Driver behind the `voroflow` binary: configuration, runs and
//! convergence studies.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use voroflow::io::{write_convergence, write_snapshot, ConvergenceRow, DiagnosticsWriter};
use voroflow::Simulation;

pub use config::{Resolved, RunConfig};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    /// Rejected while setting the run up.
    #[error(transparent)]
    Model(#[from] voroflow::Error),
    #[error("cannot write {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
    /// Failed during time stepping.
    #[error("{error} (t = {t:e}, step {step})")]
    Solver { error: voroflow::Error, t: f64, step: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver { .. } => EXIT_SOLVER,
            _ => EXIT_CONFIG,
        }
    }

    /// Multi-line `key: value` report for stderr and `error.txt`.
    pub fn report(&self) -> String {
        let (category, kind) = match self {
            CliError::Config(_) => ("config", "InvalidConfig"),
            CliError::Model(e) => ("config", e.kind()),
            CliError::Output { .. } => ("config", "Output"),
            CliError::Solver { error, .. } => ("solver", error.kind()),
        };
        let mut r = format!("error: {category}\nkind: {kind}\nmessage: {self}\n");
        if let CliError::Solver { t, step, .. } = self {
            r.push_str(&format!("time: {t:e}\nstep: {step}\n"));
        }
        r
    }
}

fn output_err(path: &Path) -> impl FnOnce(voroflow::Error) -> CliError + '_ {
    move |e| match e {
        voroflow::Error::Io(source) => CliError::Output { path: path.to_path_buf(), source },
        other => CliError::Model(other),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub remaps: usize,
    pub t: f64,
    pub snapshots: usize,
    /// Scenario observables at the final time.
    pub observables: Vec<(String, f64)>,
}

fn snapshot_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("snapshot_{k:05}.vtk"))
}

/// Runs one configuration, writing `diagnostics.csv` every step and
/// snapshots under `snapshots/` at the configured cadence (plus the initial
/// and final states).
pub fn run(cfg: &Resolved) -> Result<RunSummary, CliError> {
    let sc = &cfg.scenario;
    let snap_dir = cfg.out.join("snapshots");
    let mkdir = |d: &Path| fs::create_dir_all(d).map_err(|source| CliError::Output { path: d.to_path_buf(), source });
    mkdir(&cfg.out)?;
    if cfg.snapshots {
        mkdir(&snap_dir)?;
    }
    let (mesh, state) = sc.initial_state(cfg.seed)?;
    let observer = sc.observer();
    let mut sim = Simulation::new(mesh, state, sc.fluid.clone(), sc.controls, sc.t_start);
    sim.q_threshold = cfg.remap_threshold;

    let diag_path = cfg.out.join("diagnostics.csv");
    let mut diag = DiagnosticsWriter::create(&diag_path, observer.names()).map_err(output_err(&diag_path))?;
    diag.write(&sim, None, &observer.evaluate(&sim.state, &sim.mesh, sim.t)).map_err(output_err(&diag_path))?;

    let mut snapshots = 0;
    let mut write_snap = |sim: &Simulation| -> Result<(), CliError> {
        let p = snapshot_path(&snap_dir, snapshots);
        write_snapshot(&p, &sim.mesh, &sim.state, sim.t, sim.steps).map_err(output_err(&p))?;
        snapshots += 1;
        Ok(())
    };
    if cfg.snapshots {
        write_snap(&sim)?;
    }
    let mut next_snap = sc.t_start + cfg.snapshot_interval;
    let mut last_snap_step = 0;
    let t_end = sc.t_end;
    while sim.t < t_end {
        let rec = sim.advance(t_end).map_err(|error| CliError::Solver { error, t: sim.t, step: sim.steps })?;
        let obs = observer.evaluate(&sim.state, &sim.mesh, sim.t);
        diag.write(&sim, Some(&rec), &obs).map_err(output_err(&diag_path))?;
        // Relative slack so a cadence landing on a step boundary counts.
        if cfg.snapshots && sim.t >= next_snap - 1e-9 * cfg.snapshot_interval {
            write_snap(&sim)?;
            last_snap_step = sim.steps;
            while next_snap <= sim.t + 1e-9 * cfg.snapshot_interval {
                next_snap += cfg.snapshot_interval;
            }
        }
    }
    if cfg.snapshots && last_snap_step != sim.steps {
        write_snap(&sim)?;
    }
    diag.flush().map_err(output_err(&diag_path))?;

    let values = observer.evaluate(&sim.state, &sim.mesh, sim.t);
    Ok(RunSummary {
        steps: sim.steps,
        remaps: sim.remaps,
        t: sim.t,
        snapshots,
        observables: observer.names().iter().map(|s| s.to_string()).zip(values).collect(),
    })
}

/// Runs the configuration at every resolution (outputs in `res_<N>/`) and
/// writes `convergence.csv` to the output directory.
pub fn converge(config: &RunConfig, resolutions: &[f64], out: &Path) -> Result<Vec<ConvergenceRow>, CliError> {
    if resolutions.is_empty() {
        return Err(CliError::Config("no resolutions given".into()));
    }
    let mut rows = Vec::new();
    // Validate every resolution before spending time on any run.
    let mut runs = Vec::new();
    for &n in resolutions {
        let mut c = config.clone();
        c.resolution = Some(n);
        c.output.dir = Some(out.join(format!("res_{n}")));
        let r = c.resolve()?;
        let names = r.scenario.observer().names();
        if names != ["l2_velocity_error", "l2_pressure_error"] {
            return Err(CliError::Config(format!(
                "scenario '{}' has no analytic solution to converge against",
                r.scenario.name
            )));
        }
        runs.push(r);
    }
    for r in runs {
        let summary = run(&r)?;
        rows.push(ConvergenceRow {
            resolution: r.scenario.resolution,
            h: r.scenario.spacing(),
            velocity_error: summary.observables[0].1,
            pressure_error: summary.observables[1].1,
        });
    }
    let path = out.join("convergence.csv");
    write_convergence(&path, &rows).map_err(output_err(&path))?;
    Ok(rows)
}

/// Sizes the global thread pool from `VOROFLOW_THREADS`, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("VOROFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Config(format!("VOROFLOW_THREADS must be a positive integer, not '{v}'")))?;
    // Fails only if a pool already exists, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
