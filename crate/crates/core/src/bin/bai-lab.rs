use std::path::PathBuf;
use std::process::ExitCode;

use bai_lab::cli::{self, Command, RunOptions};
use clap::{Args, Parser, Subcommand};

/// Best-arm identification complexity solver and bandit simulator.
#[derive(Parser)]
#[command(name = "bai-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the fixed-confidence and non-adaptive complexities.
    Complexity(Common),
    /// Monte-Carlo simulation: fixed-budget error rates or fixed-confidence stopping times.
    Simulate(Common),
    /// Uniform-dominance and conjecture probes.
    Probe(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the simulator (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Complexity(c) => (Command::Complexity, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Probe(c) => (Command::Probe, c),
    };
    let opts = RunOptions {
        seed: common.seed,
        threads: common.threads,
    };
    match cli::run(command, &common.config, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bai-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
