//! `gated-spectra`: reproducible experiments on the spectral behavior of
//! deep gated matrix products. Each subcommand writes a plot-ready CSV, the
//! resolved config, and a metadata sidecar into its output directory;
//! rerunning with the same config and seed reproduces the CSV byte for
//! byte.

mod commands;
mod config;
mod table;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Divergence(String),
    Io(std::io::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<gated_spectra_core::EnsembleError> for CliError {
    fn from(e: gated_spectra_core::EnsembleError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<gated_spectra_core::LinalgError> for CliError {
    fn from(e: gated_spectra_core::LinalgError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<gated_spectra_core::error::SpectrumError> for CliError {
    fn from(e: gated_spectra_core::error::SpectrumError) -> Self {
        match e {
            gated_spectra_core::error::SpectrumError::Ensemble(err) => err.into(),
            gated_spectra_core::error::SpectrumError::Linalg(err) => err.into(),
        }
    }
}

impl From<gated_spectra_core::AlignmentError> for CliError {
    fn from(e: gated_spectra_core::AlignmentError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<gated_spectra_core::DynamicsError> for CliError {
    fn from(e: gated_spectra_core::DynamicsError) -> Self {
        match e {
            gated_spectra_core::DynamicsError::InvalidConfig(msg)
            | gated_spectra_core::DynamicsError::Infeasible(msg) => CliError::Config(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "gated-spectra",
    version,
    about = "Spectral experiments on deep gated matrix products",
    long_about = "Reproducible experiments: Lyapunov exponent convergence with finite-depth \
corrections, ordered spectra of deep products, depth scaling of intermediate products, \
singular-vector alignment, and fixed-gates training dynamics on a synthetic low-rank \
regression task (the desk-scale stand-in for full image-dataset training). \
Outputs: <out>/<subcommand>.csv, <out>/config.json, <out>/meta.json. \
Exit codes: 0 success, 2 config error, 3 numerical failure, 4 divergence. \
GATED_SPECTRA_THREADS caps Monte Carlo parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence of (1/L) log s_i to the Lyapunov exponent with its 1/L
    /// correction, over a depth grid.
    LyapunovConvergence(config::CommonArgs),
    /// Ordered top-k exponents at a single depth vs theory.
    Spectrum(config::CommonArgs),
    /// Log-spectra of the prefix partial products and their affine fits.
    DepthScaling(commands::depth_scaling::Args),
    /// Diagonal-correlation alignment diagnostics, or the deterministic
    /// synthetic separation sweep.
    Alignment(commands::alignment::Args),
    /// Gradient-descent training of a fixed-gates network on the synthetic
    /// rank-k regression task.
    Train(commands::train::Args),
    /// Monte Carlo profile of the finite-depth correction coefficients.
    DCoefficients(commands::d_coefficients::Args),
}

fn main() {
    if let Ok(threads) = std::env::var("GATED_SPECTRA_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::LyapunovConvergence(args) => commands::lyapunov_convergence::run(&args),
        Command::Spectrum(args) => commands::spectrum::run(&args),
        Command::DepthScaling(args) => commands::depth_scaling::run(&args),
        Command::Alignment(args) => commands::alignment::run(&args),
        Command::Train(args) => commands::train::run(&args),
        Command::DCoefficients(args) => commands::d_coefficients::run(&args),
    };
    std::process::exit(match outcome {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            3
        }
        Err(CliError::Divergence(msg)) => {
            eprintln!("divergence: {msg}");
            4
        }
        Err(CliError::Io(e)) => {
            eprintln!("io error: {e}");
            1
        }
    });
}
