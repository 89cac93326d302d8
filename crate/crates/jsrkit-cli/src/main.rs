mod commands;
mod input;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jsrkit::ErrorKind;

use commands::*;

#[derive(Parser)]
#[command(
    name = "jsrkit",
    version,
    about = "Joint spectral radius and Mather set toolkit"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint spectral radius interval by pruned iterative deepening.
    Estimate(EstimateArgs),
    /// Per-depth norm upper bounds and the best periodic lower bound.
    Bounds(BoundsArgs),
    /// Block upper triangular form of a reducible set.
    Triangularise(TriangulariseArgs),
    /// Barabanov (invariant) norm by fixed-point iteration.
    Barabanov(BarabanovArgs),
    /// Survivor-set approximation of the Mather set.
    Mather(MatherArgs),
    /// Absolute, periodic and Markov stability classification.
    Stability(StabilityArgs),
    /// Optimal symbol ratio for one set or along a family.
    OneRatio(OneRatioArgs),
    /// Inf-sup / sup-inf sandwich for the log-norm observable.
    Beta(BetaArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Context {
        threads: cli.threads,
        output: cli.output,
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Bounds(a) => cmd_bounds(&ctx, a),
        Command::Triangularise(a) => cmd_triangularise(&ctx, a),
        Command::Barabanov(a) => cmd_barabanov(&ctx, a),
        Command::Mather(a) => cmd_mather(&ctx, a),
        Command::Stability(a) => cmd_stability(&ctx, a),
        Command::OneRatio(a) => cmd_one_ratio(&ctx, a),
        Command::Beta(a) => cmd_beta(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<jsrkit::Error>().map(jsrkit::Error::kind) {
        Some(ErrorKind::Resource) => 3,
        Some(ErrorKind::Numeric) => 4,
        _ => 2,
    }
}
