//! `weakident`: generate reference data, identify equations, evaluate and sweep noise levels.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use weakident::Error;

use commands::RunOptions;

#[derive(Parser)]
#[command(
    name = "weakident",
    version,
    about = "Weak-form identification of differential equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// `key = value` run configuration; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds both the noise and the cross-validation partitions.
    #[arg(long)]
    seed: Option<u64>,
    /// Noise-to-signal ratio added before identification.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a registered system and write it as a dataset.
    Generate {
        system: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Identify the governing equations of a dataset.
    Identify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
    /// Identify a registered system and score the result against its known equations.
    Evaluate {
        system: String,
        /// Clean data to use instead of simulating.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
    /// Score many noisy identifications; one CSV row per (sigma, seed).
    Sweep {
        system: String,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        sigma: Vec<f64>,
        /// Seeds per noise level, counting up from `--seed`.
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> weakident::Result<()> {
    match cli.command {
        Command::Generate {
            system,
            out,
            seed,
            sigma,
        } => {
            let path = commands::generate(&system, &out, seed, sigma)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Identify { data, out, shared } => commands::identify(&data, &options(shared), &out),
        Command::Evaluate {
            system,
            data,
            out,
            shared,
        } => commands::evaluate(&system, data.as_deref(), &options(shared), &out),
        Command::Sweep {
            system,
            data,
            sigma,
            trials,
            config,
            seed,
            out,
        } => {
            let opts = RunOptions {
                config,
                seed,
                sigma: 0.0,
            };
            commands::sweep(&system, data.as_deref(), &sigma, trials, &opts, &out)
        }
    }
}

fn options(shared: Shared) -> RunOptions {
    RunOptions {
        config: shared.config,
        seed: shared.seed,
        sigma: shared.sigma,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{record}");
            exit_code(&e)
        }
    }
}

/// 2 for bad input, 1 for numerical failure.
fn exit_code(e: &Error) -> ExitCode {
    if e.is_input_error() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}
