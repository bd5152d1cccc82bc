use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{Flags, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mapes_core::Error),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => e.exit_code() as u8,
            CliError::Usage(_) => 2,
        }
    }
}

/// Multiport reduction engine for pixelated surfaces.
#[derive(Debug, Parser)]
#[command(name = "mapes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Print the port count and optionally write the port map CSV.
    Topology,
    /// Generate a synthetic network and its prior cache.
    GenPrior,
    /// Evaluate patterns against a prior.
    Eval,
    /// Compare evaluated responses with the oracle or stored responses.
    Compare,
    /// Write a sharded dataset of random patterns and their S-parameters.
    Dataset,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::resolve(cli.flags).and_then(|cfg| match cli.command {
        Command::Topology => commands::topology(&cfg),
        Command::GenPrior => commands::gen_prior(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Dataset => commands::dataset(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
