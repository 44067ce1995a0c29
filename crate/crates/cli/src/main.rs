//! `uirs`: batch experiment runner for random-gate-sequence estimation of
//! nonlinear channel properties (OTOC, unitarity).

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "uirs", version, about = "Random-sequence channel-property estimation")]
struct Cli {
    /// Worker thread count (overrides the UIRS_WORKERS environment variable).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write its CSV artifacts.
    Run {
        /// Path to the JSON experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the theory validation suite and print one line per assertion.
    OracleCheck,
}

fn resolve_workers(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("UIRS_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = resolve_workers(cli.workers) {
        if workers == 0 {
            eprintln!("error: worker count must be positive");
            return ExitCode::FAILURE;
        }
        // ignore the error if a pool was already installed
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match cli.command {
        Command::Run { config, seed } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::FAILURE;
                }
            };
            let mut parsed = match ExperimentConfig::from_json(&text) {
                Ok(parsed) => parsed,
                Err(e) => {
                    eprintln!("error: invalid config: {e}");
                    return ExitCode::FAILURE;
                }
            };
            if let Some(seed) = seed {
                parsed.master_seed = seed;
            }
            match runner::run(&parsed) {
                Ok(outcome) => {
                    if outcome.rows > 0 {
                        println!(
                            "wrote {} row(s) to {}",
                            outcome.rows,
                            outcome.csv_path.display()
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::OracleCheck => match runner::run_oracle_check(&mut std::io::stdout()) {
            Ok(0) => ExitCode::SUCCESS,
            Ok(failures) => {
                eprintln!("error: {failures} oracle assertion(s) failed");
                ExitCode::FAILURE
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
