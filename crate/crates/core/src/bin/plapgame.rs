//! Command-line front-end: one subcommand per batch operation, JSON config
//! in, CSV/JSON artifacts out.

use clap::{Parser, Subcommand};
use plapgame::config::RunConfig;
use plapgame::runner::{run_command, CommandKind, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "plapgame",
    version,
    about = "Game-based solver and verification harness for weighted p-Laplace Dirichlet problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts (default: config out_dir, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Cap on the computation worker pool; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override the simulation seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the fixed-point problem and write the value field.
    Solve,
    /// Solve, then estimate the value at x0 by Monte Carlo playouts.
    Simulate,
    /// Compare the continuum one-step operator against the predicted generator.
    Consistency,
    /// Quadrature check of the ball second-moment identity.
    Moment,
    /// Tabulate the 1D reference solution.
    Oracle,
    /// Solve across a list of step scales and compare with the reference.
    StudyEps,
    /// Solve across a list of exponents and compare with the affine limit.
    StudyP,
    /// Report configuration diagnostics without executing anything.
    Validate,
}

impl Cmd {
    fn kind(&self) -> CommandKind {
        match self {
            Cmd::Solve => CommandKind::Solve,
            Cmd::Simulate => CommandKind::Simulate,
            Cmd::Consistency => CommandKind::Consistency,
            Cmd::Moment => CommandKind::Moment,
            Cmd::Oracle => CommandKind::Oracle,
            Cmd::StudyEps => CommandKind::StudyEps,
            Cmd::StudyP => CommandKind::StudyP,
            Cmd::Validate => CommandKind::Validate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = cli.command.kind();

    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config <PATH> is required");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: malformed config {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };

    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    match run_command(kind, &cfg, &out_dir, cli.workers, cli.seed) {
        Ok(Outcome::Success) => {
            if kind == CommandKind::Validate {
                println!("configuration valid");
            }
            ExitCode::SUCCESS
        }
        Ok(Outcome::Invalid(diags)) => {
            for d in &diags {
                eprintln!("invalid: {d}");
            }
            ExitCode::from(2)
        }
        Ok(Outcome::Unconverged) => {
            eprintln!("unconverged: iteration cap reached before the tolerance");
            ExitCode::from(3)
        }
        Ok(Outcome::Unreliable) => {
            eprintln!("unreliable: truncated trajectories exceed 1% of the sample");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
