use std::path::PathBuf;
use std::process::ExitCode;

use catenoid_lab::commands::{run, Command};
use catenoid_lab::{ExperimentConfig, LabError};
use clap::Parser;

/// Numerical experiments on the linearized dynamics around the 3-D catenoid.
#[derive(Debug, Parser)]
#[command(name = "catenoid-lab", version)]
struct Cli {
    /// TOML config; the built-in default when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn execute(cli: &Cli) -> Result<(), LabError> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let manifest = run(&cli.command, &cfg)?;
    if let Command::DarbouxCheck = cli.command {
        print!("{}", std::fs::read_to_string(cfg.resolved_output_dir().join("darboux.json"))?);
    } else {
        for f in &manifest.outputs {
            println!("{f}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("catenoid-lab {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
