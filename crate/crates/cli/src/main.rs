//! `perpliq`: solve, simulate, reproduce figures, compare strategies and run the
//! acceptance suite.

// `!(a < b)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::{ExperimentConfig, Overrides};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "perpliq", version, about = "Optimal liquidation of perpetual contracts")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output root; defaults to the config value, then $PERPLIQ_OUT_DIR, then ./out.
    #[arg(long, global = true, value_name = "PATH")]
    out_dir: Option<PathBuf>,
    /// Random seed, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Number of Monte Carlo paths, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    /// Number of time steps, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    steps: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the value-function ODEs and tabulate the closed-form coefficients.
    Solve,
    /// Simulate one strategy and write ensemble statistics.
    Simulate {
        /// Also write every recorded sample of every path.
        #[arg(long)]
        per_path: bool,
    },
    /// Write the data behind one figure.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        id: u8,
    },
    /// Compare strategies across a horizon sweep on common random numbers.
    Compare,
    /// Run the acceptance criteria; exits 1 if any fails.
    Validate {
        /// Run only this criterion; repeatable.
        #[arg(long = "criterion", value_name = "ID")]
        criteria: Vec<u8>,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let out_root = output::resolve_out_dir(cli.out_dir.as_deref(), config.out_dir.as_deref());
    let ctx = Context {
        config,
        overrides: Overrides {
            seed: cli.seed,
            n_paths: cli.paths,
            n_steps: cli.steps,
        },
        out_root,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Simulate { per_path } => commands::simulate(&ctx, per_path),
        Command::Figure { id } => commands::figure(&ctx, id),
        Command::Compare => commands::compare(&ctx),
        Command::Validate { criteria } => commands::validate(&ctx, &criteria),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("perpliq: {e}");
            e.exit_code()
        }
    }
}
