//! `cda`: solve, simulate and compare continuum school-choice experiments
//! described by a TOML file.

mod commands;
mod config;
mod error;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Report};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "cda", version, about = "Continuum deferred acceptance experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output.dir`, then the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stable outcome at every sweep point.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also write the admissions functions of every iteration.
        #[arg(long)]
        trace: bool,
    },
    /// Monte Carlo over finite markets drawn from the same measure.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Model predictions next to simulation aggregates.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form match counts.
    Formulas {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<Report, CliError> {
    let (common, trace) = match &cli.command {
        Command::Solve { common, trace } => (common, *trace),
        Command::Simulate { common } | Command::Compare { common } | Command::Formulas { common } => (common, false),
    };
    let loaded = config::load(&common.config)?;
    let out = common.out.clone().or_else(|| loaded.config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let ctx = Context { loaded: &loaded, seed: common.seed, out, trace };
    match cli.command {
        Command::Solve { .. } => commands::solve(&ctx),
        Command::Simulate { .. } => commands::simulate(&ctx),
        Command::Compare { .. } => commands::compare(&ctx),
        Command::Formulas { .. } => commands::formulas(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            if report.not_converged > 0 {
                let e = CliError::NotConverged(report.not_converged, report.solves);
                eprintln!("cda: {e}");
                return e.exit_code();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cda: {e}");
            e.exit_code()
        }
    }
}
