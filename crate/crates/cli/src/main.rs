//! `ensemble-bounds`: error bounds, optimal weights, sampling and VQE
//! traces for ensemble variational calculations.
//!
//! Exit codes: 0 success, 2 validation failure (bad input, or a requested
//! check that found a violation), 3 numerical-regime failure, 4 I/O.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ensemble_bounds::ErrorKind;

use output::{Format, Output};

#[derive(Parser)]
#[command(
    name = "ensemble-bounds",
    version,
    about = "Error bounds for ensemble variational principles"
)]
struct Cli {
    /// Seed for every random choice; echoed in all outputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the main result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound prefactors and gap functions for (w, E).
    Bounds(commands::bounds::BoundsArgs),
    /// Optimal weight vectors, optionally cross-checked by grid search.
    Weights(commands::weights::WeightsArgs),
    /// Random trial ensembles, error records and envelopes.
    Sample(commands::sample::SampleArgs),
    /// Ensemble VQE on a transverse Ising model.
    Vqe(commands::vqe::VqeArgs),
    /// Permutohedron slices, constrained extrema and vertex checks.
    Polytope(commands::polytope::PolytopeArgs),
    /// Validate a record CSV against the bounds.
    Check(commands::check::CheckArgs),
}

/// Shared `(w, E)` inputs.
#[derive(Args, Clone)]
pub struct SystemArgs {
    /// Ascending energies, inline (`-1,0,2`) or `@file`.
    #[arg(long = "E", allow_hyphen_values = true)]
    pub energies: Option<String>,
    /// Non-increasing weights summing to one, inline or `@file`.
    #[arg(long = "w", allow_hyphen_values = true)]
    pub weights: Option<String>,
    /// Rescale the weights to unit sum.
    #[arg(long)]
    pub normalize: bool,
}

/// A requested check found violations; carries the exit code.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ensemble_bounds::Error>() {
            return match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Regime => 3,
                ErrorKind::Io => 4,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
        {
            return 4;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output {
        format: cli.format,
        seed: cli.seed,
        path: cli.out,
    };
    let result = match cli.command {
        Command::Bounds(a) => commands::bounds::run(a, &out),
        Command::Weights(a) => commands::weights::run(a, &out),
        Command::Sample(a) => commands::sample::run(a, &out),
        Command::Vqe(a) => commands::vqe::run(a, &out),
        Command::Polytope(a) => commands::polytope::run(a, &out),
        Command::Check(a) => commands::check::run(a, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
