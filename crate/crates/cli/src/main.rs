mod commands;
mod config;
mod fmt;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

/// Path-integral cumulant-expansion pricing of vanilla and knock-up-and-out options.
#[derive(Parser)]
#[command(name = "pathint", version)]
struct Cli {
    /// Flat JSON file with any of the options below; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    run: RunConfig,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// (ω, Π) series of the expansion density, free or absorbed
    Density,
    /// Martingale drift: numerical solution and closed form
    Drift,
    /// Price one vanilla or knock-up-and-out option
    Price,
    /// Fit every smile of a surface
    Calibrate,
    /// Knock-up-and-out prices over the Θ barrier grid
    Experiment,
    /// Run the acceptance suite
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Drift => "drift",
            Command::Price => "price",
            Command::Calibrate => "calibrate",
            Command::Experiment => "experiment",
            Command::Validate => "validate",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = RunConfig::merged(cli.config.as_deref(), &cli.run)?;
    let name = cli.command.name();
    match cli.command {
        Command::Density => commands::density(&cfg, name),
        Command::Drift => commands::drift(&cfg, name),
        Command::Price => commands::price(&cfg, name),
        Command::Calibrate => commands::calibrate(&cfg, name),
        Command::Experiment => commands::experiment(&cfg, name),
        Command::Validate => commands::validate(&cfg, name),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
