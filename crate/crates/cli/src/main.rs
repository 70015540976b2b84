//! `swot`: distances, gradient checks, palette transfer, guided diffusion,
//! and exact-W2 evaluation from the command line.
//!
//! Exit codes: 0 ok, 2 bad input, 3 configuration error, 4 numeric failure.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use swot_core::Error;

#[derive(Parser)]
#[command(name = "swot", version, about = "Sliced-Wasserstein optimal transport toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sliced distance between two point clouds
    Dist(commands::dist::DistArgs),
    /// Pixel-space palette transfer between two images
    Transfer(commands::transfer::TransferArgs),
    /// Guided diffusion sampling toward a reference cloud
    Diffuse(commands::diffuse::DiffuseArgs),
    /// Finite-difference verification of the analytic gradients
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Exact subsampled W2 between two clouds
    Eval(commands::eval::EvalArgs),
    /// Re-run a recorded manifest and verify output hashes
    Replay(commands::replay::ReplayArgs),
}

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    if let Err(e) = run(&cli, &argv) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> swot_core::Result<()> {
    match &cli.command {
        Command::Dist(args) => commands::dist::run(args, argv),
        Command::Transfer(args) => commands::transfer::run(args, argv),
        Command::Diffuse(args) => commands::diffuse::run(args, argv),
        Command::Gradcheck(args) => commands::gradcheck::run(args, argv),
        Command::Eval(args) => commands::eval::run(args, argv),
        Command::Replay(args) => commands::replay::run(args),
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EmptyDistribution
        | Error::UnequalSampleCounts(..)
        | Error::DimensionMismatch(..)
        | Error::UnsupportedFormat(_)
        | Error::CorruptHeader(_)
        | Error::Io(_) => 2,
        Error::NotAMetricOrder(_)
        | Error::SizeCapExceeded { .. }
        | Error::Config(_)
        | Error::StepNotInSchedule(_)
        | Error::NotPositiveDefinite(_)
        | Error::MissingConditional(_)
        | Error::Json(_) => 3,
        Error::NonFinite(_) | Error::NonFiniteLoss { .. } | Error::ShapeMismatch { .. } => 4,
    }
}
