//! Thin command-line entry point; all orchestration lives in the library's
//! `cli` module.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tonelli_flows::cli::{self, Experiment, Overrides};

#[derive(Parser)]
#[command(
    name = "tonelli-flows",
    about = "Euler–Poincaré flows, connecting minimizers, and Mañé critical values on U(1), SO(3), and truncated Diff(S¹)",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the action energy level κ.
    #[arg(long)]
    kappa: Option<f64>,
    /// Override the integrator time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the integration horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the RNG seed (also settable via TONELLI_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate an Euler–Poincaré / electromagnetic EPDiff flow.
    Flow(Common),
    /// Find a two-point connecting minimizer of the free-period action.
    Connect(Common),
    /// Estimate the Mañé critical values and verify the ordering chain.
    Mane(Common),
    /// Estimate Tonelli constants (m̂, M̂, b̂) for the configured Lagrangian.
    Check(Common),
    /// Measure the integrator's temporal self-convergence order.
    Convergence(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (experiment, common) = match &args.command {
        Command::Flow(c) => (Experiment::Flow, c),
        Command::Connect(c) => (Experiment::Connect, c),
        Command::Mane(c) => (Experiment::Mane, c),
        Command::Check(c) => (Experiment::Check, c),
        Command::Convergence(c) => (Experiment::Convergence, c),
    };
    let overrides = Overrides {
        kappa: common.kappa,
        dt: common.dt,
        horizon: common.horizon,
        seed: common.seed,
    };
    ExitCode::from(cli::run(experiment, &common.config, &overrides) as u8)
}
