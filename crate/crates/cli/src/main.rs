use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mlosim_cli::{compare_dirs, load_scenario, parse_policy, parse_seed_range, run_to_dir, sweep};
use mlosim_core::steering::PolicyKind;

/// Multi-link Wi-Fi MAC simulator with per-series channel bitmaps.
#[derive(Parser)]
#[command(name = "mlosim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with one seed.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory.
        #[arg(long, env = "MLOSIM_OUT")]
        out: PathBuf,
        /// Replace the scenario's steering policy.
        #[arg(long, value_parser = parse_policy)]
        policy: Option<PolicyKind>,
        /// Also write trace.csv.
        #[arg(long)]
        trace: bool,
    },
    /// Run every policy over an inclusive seed range.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive range, e.g. 1..10.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: std::ops::RangeInclusive<u64>,
        /// Comma-separated policy names.
        #[arg(long, value_delimiter = ',', value_parser = parse_policy, required = true)]
        policies: Vec<PolicyKind>,
        #[arg(long, env = "MLOSIM_OUT")]
        out: PathBuf,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        trace: bool,
    },
    /// Check a scenario file and list every problem.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Per-metric deltas of run B against run A.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, seed, out, policy, trace } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(p) = policy {
                s = s.with_policy(p);
            }
            run_to_dir(&s, seed, &out, trace)?;
            println!("wrote {}", out.display());
        }
        Command::Sweep { scenario, seeds, policies, out, jobs, trace } => {
            let s = load_scenario(&scenario)?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let summary = sweep(&s, seeds, &policies, &out, jobs, trace)?;
            println!("wrote {}", summary.display());
        }
        Command::Validate { scenario } => {
            load_scenario(&scenario)?;
            println!("OK");
        }
        Command::Compare { a, b } => print!("{}", compare_dirs(&a, &b)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
