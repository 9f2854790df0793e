mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use boardpush::Error;

#[derive(Parser)]
#[command(name = "boardpush", version, about = "Humanoid skateboard pushing: simulate, train, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model parameter files.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Train a policy with PPO.
    Train {
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Override a configuration value, e.g. `train.total_steps=1000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Run directory.
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Roll out the deterministic policy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run configuration; defaults to `run.json` beside the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Forward deck-velocity command, m/s.
        #[arg(long, default_value_t = 0.4)]
        command: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
    /// Plot a trajectory written by `eval`.
    Replay {
        trajectory: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ModelAction {
    /// Validate a model parameter file and print a summary.
    Check { file: PathBuf },
}

/// Maps failures to documented exit codes.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidTree { .. } => 2,
        Error::TrainingAborted { .. } => 3,
        Error::Architecture(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Model {
            action: ModelAction::Check { file },
        } => commands::model_check(&file),
        Command::Train {
            config,
            overrides,
            out,
            resume,
        } => commands::train(&config, &overrides, &out, resume.as_deref()),
        Command::Eval {
            checkpoint,
            config,
            overrides,
            episodes,
            command,
            seed,
            out,
        } => commands::eval(&commands::EvalArgs {
            checkpoint: &checkpoint,
            config: config.as_deref(),
            overrides: &overrides,
            episodes,
            command,
            seed,
            out: &out,
        }),
        Command::Replay { trajectory, out } => commands::replay(&trajectory, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
