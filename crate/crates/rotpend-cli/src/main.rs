//! `rotpend <command> <config.toml>`: run one experiment and write its artifacts.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod commands;
mod config;
mod error;

use commands::Command;
use config::ExperimentConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rotpend", version, about = "Rotator-pendulum experiments")]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    config: PathBuf,
}

fn run(args: &Args) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    cfg.apply_env();
    commands::run(args.command, &cfg)?;
    Ok(cfg.output_dir)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(dir) => {
            eprintln!("{}: artifacts in {}", args.command, dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rotpend {}: {e}", args.command);
            ExitCode::from(e.exit_code())
        }
    }
}
