//! Batch front end for the capillary Christoffel-Minkowski solver.
//!
//! Exit codes: 0 success; 1 configuration or internal error; 2 data
//! hypothesis violation; 3 continuation failure (stall or convexity loss).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use capcm::error::CapcmError;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "capcm",
    about = "Capillary Christoffel-Minkowski solver and verification suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run configuration (flat key = value text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized suites (overrides output.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies grid.nr and grid.nphi.
    #[arg(long, default_value_t = 1.0)]
    grid_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve sigma_k(tau[s]) = phi and write the solution artifacts.
    Solve(CommonArgs),
    /// Evaluate phi = sigma_k(tau[s]) for a support-function preset.
    Forward(CommonArgs),
    /// Run the verification suite at two grid resolutions.
    Validate(CommonArgs),
    /// Reconstruct the hypersurface from a solution CSV and write OBJ.
    ExportMesh(CommonArgs),
    /// Quick internal consistency checks.
    Selftest,
}

fn thread_cap_from_env() {
    if let Ok(v) = std::env::var("CAPCM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            capcm::par::set_max_threads(n.max(1));
        }
    }
}

fn run(cli: Cli) -> Result<(), CapcmError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let out = args.out.unwrap_or_else(|| cfg.output_dir());
            commands::cmd_solve(&cfg, &out, args.grid_scale)
        }
        Command::Forward(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let out = args.out.unwrap_or_else(|| cfg.output_dir());
            commands::cmd_forward(&cfg, &out, args.grid_scale)
        }
        Command::Validate(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let out = args.out.unwrap_or_else(|| cfg.output_dir());
            let seed = match args.seed {
                Some(s) => s,
                None => cfg.seed()?,
            };
            commands::cmd_validate(&cfg, &out, seed)
        }
        Command::ExportMesh(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let out = args.out.unwrap_or_else(|| cfg.output_dir());
            commands::cmd_export_mesh(&cfg, &out, args.grid_scale)
        }
        Command::Selftest => commands::cmd_selftest(),
    }
}

fn main() -> ExitCode {
    thread_cap_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(0),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                CapcmError::HypothesisViolation(_) => 2,
                CapcmError::ContinuationStall(_) | CapcmError::ConvexityLoss { .. } => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
