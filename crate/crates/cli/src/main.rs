use std::path::PathBuf;
use std::process::ExitCode;

use catbranch::config::parse_config;
use catbranch::runner::{exit_code, run, Experiment};
use clap::Parser;

/// Simulation and verification experiments for catalytic branching diffusions.
#[derive(Debug, Parser)]
#[command(name = "catbranch", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Experiment,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    plot: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output.dir = out;
    }
    cfg.output.plot |= cli.plot;
    match run(cli.subcommand, &cfg) {
        Ok(outcome) => {
            println!("{}: {}", cli.subcommand.name(), outcome.verdict);
            for f in &outcome.files {
                println!("  wrote {}", f.display());
            }
            ExitCode::from(exit_code(outcome.verdict) as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
