//! Command-line front end: configuration files, subcommands and run records.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::Args;

use output::Format;

#[derive(Debug, Args)]
pub struct Globals {
    /// System configuration (JSON).
    #[arg(long, global = true, env = "ARRIVAL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true, env = "ARRIVAL_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json", env = "ARRIVAL_FORMAT")]
    pub format: Format,
    /// Overrides the config's ħ.
    #[arg(long, global = true, env = "ARRIVAL_HBAR")]
    pub hbar: Option<f64>,
    #[arg(long, global = true, env = "ARRIVAL_SEED")]
    pub seed: Option<u64>,
    /// Dark-start tolerance on ‖Dψ‖/‖D‖ (report, fit) and relative
    /// tolerance of the minimizer refinement (sweep).
    #[arg(long, global = true, env = "ARRIVAL_TOL")]
    pub tol: Option<f64>,
}
