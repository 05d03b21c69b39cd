//! Experiment runner CLI.
//!
//! `fedsvm run --config exp.toml [--output out.csv] [--dataset file]
//! [--seed-offset N]` executes the configured sweep and writes the
//! metrics CSV. `fedsvm gen-data --output file [--seed N]` writes a
//! synthetic dataset in the UCI breast-cancer-wisconsin format.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 run error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedsvm::bench::{emit_csv, parse_config, sweep_put};
use fedsvm::privacy::{budget_report, PrivacySpec};
use fedsvm::synth;
use fedsvm::Result;

/// Dataset path override, honored only when `--dataset` is absent.
const DATASET_ENV: &str = "FEDSVM_DATASET";

#[derive(Parser)]
#[command(name = "fedsvm", about = "Privacy-utility benchmark for DP federated SVM training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment sweep described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output_path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config's dataset_path (takes precedence over
        /// the FEDSVM_DATASET environment variable).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Added to every seed in the config's seed list.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Generate a synthetic dataset in the UCI file format.
    GenData {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = synth::CANONICAL_SEED)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, output, dataset, seed_offset } => {
            let mut cfg = parse_config(&config)?;
            if let Some(path) = dataset {
                cfg.dataset_path = path;
            } else if let Ok(path) = std::env::var(DATASET_ENV) {
                cfg.dataset_path = PathBuf::from(path);
            }
            if let Some(path) = output {
                cfg.output_path = path;
            }
            if seed_offset != 0 {
                cfg.seeds = cfg.seeds.iter().map(|s| s.wrapping_add(seed_offset)).collect();
            }
            for &n in &cfg.client_grid {
                for &eps in &cfg.epsilon_grid {
                    let spec = PrivacySpec {
                        epsilon_total: eps,
                        delta_total: cfg.delta_total,
                        clip_bound: cfg.clip_bound,
                        rounds: cfg.rounds,
                        n_clients: n,
                    };
                    eprint!("{}", budget_report(&spec)?);
                }
            }
            let rows = sweep_put(&cfg)?;
            emit_csv(&rows, &cfg.output_path)?;
            println!("wrote {} rows to {}", rows.len(), cfg.output_path.display());
            Ok(())
        }
        Command::GenData { output, seed } => {
            synth::write_dataset(&output, seed)?;
            println!("wrote dataset to {}", output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
