use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod checkpoint;
mod config;
mod error;
mod eval;
mod metrics;
mod plot;
mod train;

use error::CliError;

#[derive(Parser)]
#[command(name = "resetless", version, about = "Reset-free multi-task RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm on one domain as described by a JSON config.
    Train {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from resume.bin in the output directory if present.
        #[arg(long)]
        resume: bool,
    },
    /// Roll out a checkpointed policy and report its success rate.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for eval.csv; defaults to the checkpoint's run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render success curves and task frequencies from run directories.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, seed, out, resume } => {
            let resolved = train::run(&train::TrainArgs { config, seed, out, resume })?;
            eprintln!("finished {} steps in {}", resolved.config.budget, resolved.config.out_dir.display());
        }
        Command::Eval { checkpoint, task, episodes, seed, out } => {
            println!("{}", eval::run(&eval::EvalArgs { checkpoint, task, episodes, seed, out })?);
        }
        Command::Plot { metrics, out } => {
            let n = plot::run(&metrics, &out)?;
            eprintln!("plotted {n} run(s) to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
