use std::process::ExitCode;
use std::time::Instant;

use arrival_cli::commands::{self, DensityArgs, FitArgs, GroundStateArgs, MonteCarloArgs, Status, SweepArgs, VerifyArgs};
use arrival_cli::output::{emit, RunRecord};
use arrival_cli::Globals;
use clap::{Parser, Subcommand};

/// Arrival-time statistics, energy-time relations and their certificates
/// for absorptive quantum systems.
#[derive(Debug, Parser)]
#[command(name = "arrival", version)]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moments, energy spread and the two uncertainty ratios.
    Report,
    /// Table of t, P(t) and S(t).
    Density(DensityArgs),
    /// Uncertainty products along one model parameter.
    Sweep(SweepArgs),
    /// First-jump sampling with a KS comparison against P(t).
    Montecarlo(MonteCarloArgs),
    /// Randomized check of the relations, certificates and identities.
    Verify(VerifyArgs),
    /// Discretized oscillator and wall-plus-linear spectra.
    Groundstate(GroundStateArgs),
    /// L1 fits of the minimal Gaussian and Airy² distributions.
    Fit(FitArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let assumption = err
        .chain()
        .filter_map(|e| e.downcast_ref::<arrival_core::Error>())
        .any(|e| matches!(e, arrival_core::Error::AssumptionViolated { .. }));
    if assumption {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.globals;
    let start = Instant::now();
    let run = match &cli.command {
        Command::Report => commands::report(g),
        Command::Density(a) => commands::density(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::Montecarlo(a) => commands::montecarlo(g, a),
        Command::Verify(a) => commands::verify(g, a),
        Command::Groundstate(a) => commands::groundstate(g, a),
        Command::Fit(a) => commands::fit(g, a),
    };
    let run = match run {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let record = RunRecord {
        tool: "arrival",
        version: env!("CARGO_PKG_VERSION"),
        command: run.command,
        config_digest: run.digest,
        seeds: run.seeds,
        wall_time_s: start.elapsed().as_secs_f64(),
        parameters: run.parameters,
        config: run.config,
        outputs: run.outputs,
        table: run.table,
    };
    if let Err(e) = emit(&record, g.format, g.out.as_deref()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run.status {
        Status::Ok => ExitCode::SUCCESS,
        Status::AssumptionViolated(msg) => {
            eprintln!("assumption violated: {msg}");
            ExitCode::from(2)
        }
        Status::Failed(msg) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
    }
}
