mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::{CheckFailed, NumericFailure};
use crate::config::{ConfigError, EngineChoice, ExperimentConfig, Scheme};

/// Generation and amplification of coherent-state superpositions.
#[derive(Parser)]
#[command(name = "catsynth", version)]
struct Cli {
    /// Simulation engine (overrides the config file).
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineChoice>,
    /// Fock-space dimension per mode (overrides the config file).
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity curves of the photon-subtracted states against ideal cats.
    ReproduceFig2,
    /// The four on/off-detector panels: Wigner grids and fidelities.
    ReproduceFig3,
    /// Run the scheme named in the config.
    Generate,
    /// Amplify a pair of cats by conditional homodyne detection.
    Amplify,
    /// Run a full amplification tree.
    Cascade,
    /// Run the acceptance criteria.
    Check,
}

fn resolve(cli: &Cli, scheme: Option<Scheme>) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = scheme {
        config.scheme = s;
    }
    if let Some(e) = cli.engine {
        config.engine = e;
    }
    if let Some(d) = cli.dim {
        config.dim = d;
    }
    if let Some(o) = &cli.out {
        config.output_dir = o.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::ReproduceFig2 => {
            let config = resolve(cli, None)?;
            commands::reproduce_fig2(cli.dim.unwrap_or(64), &config.output_dir)
        }
        Command::ReproduceFig3 => {
            let config = resolve(cli, None)?;
            let engine = cli.engine.unwrap_or(EngineChoice::Both);
            let grid = config.grid.unwrap_or_default();
            commands::reproduce_fig3(engine, config.dim, grid, &config.output_dir)
        }
        Command::Generate => commands::generate(resolve(cli, None)?),
        Command::Amplify => commands::amplify(resolve(cli, Some(Scheme::Amplify))?),
        Command::Cascade => commands::cascade(resolve(cli, Some(Scheme::Cascade))?),
        Command::Check => commands::check(),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<CheckFailed>().is_some() {
        return 4;
    }
    if err.downcast_ref::<NumericFailure>().is_some() {
        return 3;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<catsynth::Error>() {
        Some(e) if e.is_numeric() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
