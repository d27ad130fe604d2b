use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use decrspi_cli::config::ConfigArgs;
use decrspi_cli::solve::csv_string;
use decrspi_cli::{run_evaluate, run_oracle, run_scaling, run_solve};

#[derive(Parser)]
#[command(
    name = "decrspi",
    version,
    about = "Rollout sampling policy iteration for decentralized POMDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve `runs` times, write one CSV row per run and the best policy
    Solve(ConfigArgs),
    /// Evaluate a saved policy on the configured domain
    Evaluate {
        /// Policy JSON written by `solve --policy-out`
        #[arg(long)]
        policy: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Agent or horizon scaling study
    Scaling {
        /// Comma-separated DSN agent counts, e.g. 4,8,12,16
        #[arg(long, value_delimiter = ',')]
        agent_counts: Vec<usize>,
        /// Comma-separated horizons, e.g. 5,10,20
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Exact-versus-sampled verification suite on SignalMatch
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_csv<T: serde::Serialize>(out: Option<&PathBuf>, rows: &[T]) -> Result<()> {
    if out.is_none() {
        print!("{}", csv_string(rows)?);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => {
            let config = args.resolve()?;
            let report = run_solve(&config)?;
            print_csv(config.out.as_ref(), &report.rows)?;
            eprintln!("best run: {}", report.best_run);
        }
        Command::Evaluate { policy, config } => {
            let config = config.resolve()?;
            let row = run_evaluate(&policy, &config)?;
            print_csv(config.out.as_ref(), &[row])?;
        }
        Command::Scaling {
            agent_counts,
            horizons,
            config,
        } => {
            let mut config = config.resolve()?;
            if !agent_counts.is_empty() {
                config.agent_counts = agent_counts;
            }
            if !horizons.is_empty() {
                config.horizons = horizons;
            }
            let rows = run_scaling(&config)?;
            print_csv(config.out.as_ref(), &rows)?;
        }
        Command::Oracle { seed } => {
            let checks = run_oracle(seed)?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                anyhow::bail!("{failed} oracle checks failed");
            }
        }
    }
    Ok(())
}
