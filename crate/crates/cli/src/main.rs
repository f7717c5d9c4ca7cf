//! Command-line experiment driver: single-drop solution dumps, Monte Carlo
//! outage sweeps, closed-form reliability grids, and solver convergence
//! traces, emitted as JSON or CSV for external plotting.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "mmcomp",
    version,
    about = "Blockage-aware coordinated multi-point beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one drop and dump the full solution as JSON
    Solve(SolveArgs),
    /// Monte Carlo outage / sum-rate sweep over one parameter (CSV)
    Sweep(SweepArgs),
    /// Closed-form reliability over a blockage-density x floor grid (CSV)
    Theory(TheoryArgs),
    /// Per-iteration solver traces on one fixed drop (CSV)
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file (built-in defaults when omitted)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configured one
    #[arg(long)]
    seed: Option<u64>,

    /// Output file (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    /// Merged single-loop solver
    Kkt,
    /// Two-loop successive convex approximation
    Sca,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HybridArg {
    /// Fully digital array
    Off,
    /// One analog beam per served user
    #[value(name = "per_user")]
    PerUser,
    /// Single shared analog beam per transmitter
    Compromise,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    /// Matched filters with an equal power split
    Mrt,
    /// Robust solver pinned to full-set coherence
    #[value(name = "full_jt")]
    FullJt,
    /// Nearest-transmitter-only service
    Cb,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Digital solver
    #[arg(long, value_enum, default_value = "kkt")]
    solver: SolverArg,

    /// Analog front end for the solver
    #[arg(long, value_enum, default_value = "off")]
    hybrid: HybridArg,

    /// RF chains per transmitter (per_user front end; defaults to the user count)
    #[arg(long = "n-rf", value_name = "N")]
    n_rf: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Swept parameter and values, KEY=V1,V2,... with KEY one of
    /// eta, L, tx_power_dbm, psi, beta, n_rf
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: String,

    /// Monte Carlo drops per sweep point
    #[arg(long, default_value_t = 100)]
    drops: usize,

    /// Digital solver
    #[arg(long, value_enum, default_value = "kkt")]
    solver: SolverArg,

    /// Reference designs to run alongside the solver (repeatable)
    #[arg(long, value_enum)]
    baseline: Vec<BaselineArg>,

    /// Analog front end for the solver rows (references stay digital)
    #[arg(long, value_enum, default_value = "off")]
    hybrid: HybridArg,

    /// RF chains per transmitter (per_user front end)
    #[arg(long = "n-rf", value_name = "N")]
    n_rf: Option<usize>,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Blockage densities to tabulate (default 0, 0.001, ..., 0.010)
    #[arg(long, value_name = "V1,V2,...")]
    eta: Option<String>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Trace only this solver (default: both)
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Solve(args) => commands::solve(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Theory(args) => commands::theory(args),
        Command::Convergence(args) => commands::convergence(args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
