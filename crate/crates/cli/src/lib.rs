//! Command-line front end for the limsup pipeline.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_build, cmd_check, cmd_dimension, Artifacts};
pub use config::{Overrides, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_STAGE: u8 = 2;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_STAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "limsup",
    version,
    about = "Local measures, Cantor trees and dimension estimates for limsup sets of balls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the dimension function against the space.
    Check(CommonArgs),
    /// Run selection, local measure, tree and mass bound for each C.
    Build(CommonArgs),
    /// Bisect for the transition exponent and run the box-count oracle.
    Dimension(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Comma-separated list of C values.
    #[arg(long, value_delimiter = ',')]
    pub c_list: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<u64>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            depth: self.depth,
            c_list: self.c_list.clone(),
            samples: self.samples,
        }
    }
}

type CommandFn = fn(&RunConfig) -> Result<Artifacts, CliError>;

/// Runs a parsed command, writes its artifacts, and returns the exit code.
pub fn run(cli: &Cli) -> Result<(Artifacts, u8), CliError> {
    let (args, cmd): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Check(a) => (a, cmd_check),
        Command::Build(a) => (a, cmd_build),
        Command::Dimension(a) => (a, cmd_dimension),
    };
    let cfg = RunConfig::load(&args.config, &args.overrides())?;
    let artifacts = cmd(&cfg)?;
    artifacts.write(&cfg.out)?;
    let code = if artifacts.ok() { EXIT_OK } else { EXIT_STAGE };
    Ok((artifacts, code))
}
