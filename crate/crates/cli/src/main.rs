//! `mfpt`: scenario-driven front end for the analytic, finite-difference
//! and Monte Carlo engines.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{GuardTripped, RunFlags, Sink};
use scenario::{Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "mfpt", version, about = "Mean first passage times for anisotropic velocity-jump transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form T(r) on a radius grid (disk or annulus).
    Analytic(Common),
    /// Finite-difference T on the scenario grid, with a PGM heatmap.
    Solve(Common),
    /// Monte Carlo exit-time estimates, trajectories and survival curves.
    Simulate(Common),
    /// Distance, direction, anisotropy and tensor fields of the environment.
    Env(Common),
    /// Analytic, finite-difference and Monte Carlo values side by side.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Also solve the isotropic problem and write the difference map.
    #[arg(long)]
    baseline_isotropic: bool,
    /// Event cap per walker; also lifts the inner-exit guard.
    #[arg(long, value_name = "N")]
    raise_event_cap: Option<u64>,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_BAD_SCENARIO: u8 = 2;
const EXIT_GUARD: u8 = 3;

fn run(cli: Cli) -> anyhow::Result<Vec<PathBuf>> {
    let (which, common) = match &cli.command {
        Command::Analytic(c) => ("analytic", c),
        Command::Solve(c) => ("solve", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Env(c) => ("env", c),
        Command::Compare(c) => ("compare", c),
    };
    let scenario = Scenario::load(&common.scenario)?;
    let flags = RunFlags {
        seed: common.seed,
        baseline_isotropic: common.baseline_isotropic,
        raise_event_cap: common.raise_event_cap,
    };
    let stochastic = matches!(which, "simulate" | "compare");
    let seed = stochastic.then(|| flags.seed.unwrap_or(scenario.mc.seed));
    let sink = Sink::new(&common.out, &scenario, seed)?;
    match which {
        "analytic" => commands::analytic(&scenario, &sink),
        "solve" => commands::solve(&scenario, &flags, &sink),
        "simulate" => commands::simulate(&scenario, &flags, &sink),
        "env" => commands::env(&scenario, &sink),
        _ => commands::compare(&scenario, &flags, &sink),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<GuardTripped>().is_some() {
                ExitCode::from(EXIT_GUARD)
            } else if e.downcast_ref::<ScenarioError>().is_some() {
                ExitCode::from(EXIT_BAD_SCENARIO)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
