//! Command-line front end for the quantum p-spin laboratory.
//!
//! Subcommands sweep pressures over parameter grids, study convergence in
//! p against the QREM closed forms, map the phase diagram, test
//! self-averaging and run cluster censuses. All outputs are deterministic
//! functions of the configuration: identical configs (at any thread
//! count) produce byte-identical files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 engine error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::AppError;

#[derive(Parser)]
#[command(
    name = "qpspin",
    version,
    about = "Quantum p-spin glass laboratory",
    after_help = "Config files are flat `key = value` text; command-line flags override \
file values. Grids accept comma lists (0.1,0.5) or linspace specs (lo:hi:count). \
Relative output paths are joined onto $QPSPIN_OUTPUT_DIR when set."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quenched pressure over a (variant, p, n, beta, gamma) grid.
    Pressure(commands::PressureArgs),
    /// Quenched pressures per p against the limiting closed form.
    ConvergeP(commands::ConvergePArgs),
    /// Pressure and branch indicator over a (beta, gamma) grid.
    PhaseDiagram(commands::PhaseDiagramArgs),
    /// Empirical concentration of the pressure vs the Gaussian bound.
    Selfavg(commands::SelfavgArgs),
    /// Deep-hole cluster census: components, diameters, restricted norms.
    ClusterCensus(commands::ClusterCensusArgs),
    /// REM/QREM closed forms, critical field and 1/p corrections.
    ClosedForm(commands::ClosedFormArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pressure(args) => commands::run_pressure(args),
        Command::ConvergeP(args) => commands::run_converge_p(args),
        Command::PhaseDiagram(args) => commands::run_phase_diagram(args),
        Command::Selfavg(args) => commands::run_selfavg(args),
        Command::ClusterCensus(args) => commands::run_cluster_census(args),
        Command::ClosedForm(args) => commands::run_closed_form(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Engine(e)) => {
            eprintln!("engine error: {e}");
            ExitCode::from(3)
        }
    }
}
