//! `avgopt`: run averaging and distributed-optimization experiments from a
//! JSON config. Exit codes: 0 success, 1 audit failure, 2 config error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Context, Failure};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "avgopt", version, about = "Averaging dynamics and distributed subgradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check row-stochasticity, self-loops, conditional column sums and
    /// B-connectivity; writes assumptions.json.
    VerifyChain(Common),
    /// Run the autonomous dynamics x(t+1) = W(t+1) x(t) per seed.
    Consensus(Common),
    /// Run the distributed subgradient method per seed.
    Optimize(Common),
    /// Fit the geometric decay of E[diam Φ(t, 0)]; writes decay.json.
    EstimateRate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides "output_dir" in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds for consensus/optimize (0..N), verification trials for
    /// verify-chain, Monte Carlo trials for estimate-rate.
    #[arg(long)]
    trials: Option<usize>,
    /// Added to every seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

type Handler = fn(&Context, ExperimentConfig, Option<usize>, u64) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, common, cmd): (&'static str, Common, Handler) = match cli.command {
        Command::VerifyChain(c) => ("verify-chain", c, commands::verify_chain),
        Command::Consensus(c) => ("consensus", c, commands::consensus),
        Command::Optimize(c) => ("optimize", c, commands::optimize),
        Command::EstimateRate(c) => ("estimate-rate", c, commands::estimate_rate),
    };
    let cfg = ExperimentConfig::load(&common.config).map_err(Failure::Config)?;
    let out = commands::resolve_out(common.out.as_deref(), &cfg)?;
    let ctx = Context {
        command: name,
        config_path: common.config,
        out,
    };
    cmd(&ctx, cfg, common.trials, common.seed_offset)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("avgopt: {f}");
            ExitCode::from(f.code())
        }
    }
}
