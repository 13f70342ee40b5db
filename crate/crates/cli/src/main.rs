//! `hamdesc` — experiment runner for conformal Hamiltonian descent.
//!
//! Subcommands: `run` integrates the discrete schemes from a JSON config,
//! `rates` prints the certified step bounds and contraction parameters,
//! `ode` integrates the continuous flow, `lower` explores the scalar
//! two-power system behind the rate dichotomy, and `compare` sweeps
//! iteration counts across dimensions.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags or
//! config, missing certificates, mismatched dimensions), 3 for runtime
//! failures (subsolver breakdown, stiffness, unwritable output).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// A classified failure; the variant fixes the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// The request itself is unusable: bad config, impossible pairing.
    Config(String),
    /// The request was sound but the computation broke down.
    Solver(String),
    /// Output could not be written.
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) | Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Io(m) => m,
        }
    }
}

/// Global flags shared by every subcommand.
pub struct Ctx {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Ctx {
    fn ensure_out_dir(&self) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.out).map_err(|e| {
            Failure::Io(format!("cannot create {}: {e}", self.out.display()))
        })
    }
}

#[derive(Parser)]
#[command(
    name = "hamdesc",
    about = "Momentum-style first-order optimization with certificates",
    version
)]
struct Cli {
    /// Output directory for CSV/JSON files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized inputs (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress per-result stdout lines; files are still written.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run discrete solvers from a config; writes one trajectory CSV per
    /// method and a summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Derive assumption constants, step-size bounds, and contraction
    /// parameters for a config's pairing; writes rates.json.
    Rates {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the continuous flow; writes ode.csv and ode.json.
    Ode {
        #[arg(long)]
        config: PathBuf,
    },
    /// The scalar two-power system: rate fits, critical-path shooting, and
    /// phase-portrait sweeps.
    Lower(LowerArgs),
    /// Iterations-to-tolerance across dimensions; writes compare.csv/.json.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LowerMode {
    /// Simulate one path and fit its decay against the predicted exponent.
    Generic,
    /// Shoot for the critical initial condition separating slow from
    /// crossing paths, then fit the critical path's linear rate.
    Eta,
    /// Sample trajectories across a grid of starting points.
    Sweep,
}

#[derive(Debug, clap::Args)]
pub struct LowerArgs {
    /// Momentum power a > 1 of the flow x' = |p|^{a-1}sgn(p).
    #[arg(long)]
    pub a: f64,
    /// Position power b > 1 of the force -|x|^{b-1}sgn(x).
    #[arg(long)]
    pub b: f64,
    /// Damping coefficient.
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum)]
    pub mode: LowerMode,
    /// Relative bracket width for eta shooting.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Integration horizon (defaults: 1e4 for generic/eta, 50 for sweep).
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Starting position for generic mode.
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    /// Sweep grid: smallest starting position.
    #[arg(long, default_value_t = 0.2)]
    pub theta_min: f64,
    /// Sweep grid: largest starting position.
    #[arg(long, default_value_t = 2.0)]
    pub theta_max: f64,
    /// Sweep grid: number of starting positions.
    #[arg(long, default_value_t = 8)]
    pub theta_count: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { out: cli.out, seed: cli.seed, quiet: cli.quiet };
    let result = match &cli.command {
        Command::Run { config } => commands::cmd_run(&ctx, config),
        Command::Rates { config } => commands::cmd_rates(&ctx, config),
        Command::Ode { config } => commands::cmd_ode(&ctx, config),
        Command::Lower(args) => commands::cmd_lower(&ctx, args),
        Command::Compare { config } => commands::cmd_compare(&ctx, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
