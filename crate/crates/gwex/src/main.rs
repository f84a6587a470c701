use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gwex::commands::{run_file, Command};

/// Tagged-particle exclusion experiments on Galton-Watson trees.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// One of: speed, validate, oracle, stationarity.
    command: Command,
    /// Experiment config (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config and GWEX_MASTER_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(short, long, env = "GWEX_WORKERS")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_file(cli.command, &cli.config, cli.out.as_deref(), cli.seed, cli.workers) {
        Ok(record) => {
            for c in &record.checks {
                println!("{:<5} {:<32} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
            }
            for e in &record.estimates {
                println!(
                    "{:<13} {:<13} {:.4} [{:.4}, {:.4}]",
                    e.estimator, e.distance, e.point, e.lower, e.upper
                );
            }
            if record.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
