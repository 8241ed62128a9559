//! `pquench`: reproducible experiments on the photonic quench toolkit.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] photonic_quench::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use photonic_quench::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Convergence { .. }) => 3,
            CliError::Core(E::Io(_)) | CliError::Io(_) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pquench", version, about = "Photonic spin-chain quench simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (key = value sections or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed key of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimised or analytic (T_bulk, T_ends, Q) rows.
    Tables,
    /// Site occupation after each walk step.
    Transfer,
    /// Boson and fermion correlation matrices of a mesh.
    Correlate,
    /// Readout-stage fringe scan.
    Fringes,
    /// Quench report: entanglement fractions, rainbow fidelity, visibilities.
    Quench,
    /// Reconstruct unitaries from a measurement file.
    TomographyFit,
    /// Write a synthetic measurement file.
    TomographySynthesize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.parallel == 0 {
        eprintln!("error: --parallel must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.parallel).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let run = commands::Run { config: cli.config, out: cli.out, seed: cli.seed };
    let result = match cli.command {
        Command::Tables => commands::tables(&run),
        Command::Transfer => commands::transfer(&run),
        Command::Correlate => commands::correlate(&run),
        Command::Fringes => commands::fringes(&run),
        Command::Quench => commands::quench(&run),
        Command::TomographyFit => commands::tomography_fit(&run),
        Command::TomographySynthesize => commands::tomography_synthesize(&run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
