use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lddmd::commands;

/// Latent diffeomorphic dynamic mode decomposition: synthetic data
/// generation, training, evaluation and checkpoint inspection.
#[derive(Parser)]
#[command(name = "lddmd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic benchmark series (clean, noisy, latent truth).
    Generate {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Train a model on the configured dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint: NSE report plus prediction/latent exports.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Worker threads for batch prediction (output is identical for
        /// any value).
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Print learned parameters of a checkpoint and write a JSON sidecar.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { config } => commands::cmd_generate(config),
        Command::Train { config } => commands::cmd_train(config),
        Command::Eval {
            config,
            checkpoint,
            threads,
        } => commands::cmd_eval(config, checkpoint, *threads),
        Command::Inspect { checkpoint } => commands::cmd_inspect(checkpoint),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
