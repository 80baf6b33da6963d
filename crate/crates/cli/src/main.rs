use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use voroflow::bench::SCENARIOS;
use voroflow::io::convergence_orders;
use voroflow_cli::{converge, init_threads, run, CliError, RunConfig};

/// Two-phase flow on moving Voronoi meshes.
#[derive(Parser)]
#[command(name = "voroflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Jitter seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario at several resolutions and fit convergence orders.
    Converge {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in scenario names.
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    init_threads()?;
    match cmd {
        Command::ListScenarios => {
            for s in SCENARIOS {
                println!("{s}");
            }
        }
        Command::Run { config, out, seed } => {
            let mut c = RunConfig::load(&config)?;
            if out.is_some() {
                c.output.dir = out;
            }
            if seed.is_some() {
                c.seed = seed;
            }
            let r = c.resolve()?;
            let result = run(&r);
            if let Err(e @ CliError::Solver { .. }) = &result {
                // Best effort: the report also goes to stderr.
                let _ = std::fs::write(r.out.join("error.txt"), e.report());
            }
            let s = result?;
            println!("{}: {} steps, {} remaps, t = {:e}, {} snapshots", r.scenario.name, s.steps, s.remaps, s.t, s.snapshots);
            for (name, v) in &s.observables {
                println!("  {name} = {v:e}");
            }
        }
        Command::Converge { config, resolutions, out } => {
            let c = RunConfig::load(&config)?;
            let out = out.or_else(|| c.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let rows = converge(&c, &resolutions, &out)?;
            println!("{:>10} {:>12} {:>14} {:>14}", "resolution", "h", "velocity", "pressure");
            for r in &rows {
                println!("{:>10} {:>12.4e} {:>14.6e} {:>14.6e}", r.resolution, r.h, r.velocity_error, r.pressure_error);
            }
            let show = |o: Option<f64>| o.map_or("n/a".to_string(), |o| format!("{o:.3}"));
            let (ov, op) = convergence_orders(&rows);
            println!("order: velocity {}, pressure {}", show(ov), show(op));
        }
    }
    Ok(())
}
