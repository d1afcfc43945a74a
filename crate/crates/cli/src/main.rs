//! `vmesh`: generate, project, measure and run visual meshes.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad flags, invalid
//! geometry or lens, missing required paths), 1 for runtime errors (I/O,
//! corrupt files, image or network mismatches).

mod commands;
mod config;
mod draw;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::BenchOptions;
use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "vmesh", version, about = "Constant-density visual mesh tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the mesh (or reuse the cached one) and write it to paths.mesh_cache.
    Generate,
    /// Draw visible nodes and edges over paths.image (or a blank frame) into paths.output.
    Project,
    /// Points on an object swept away from the camera, as CSV.
    Density {
        /// Ground distances in metres, increasing. Defaults to 0 to the mesh limit in 0.5 m steps.
        #[arg(long, value_delimiter = ',')]
        distances: Option<Vec<f64>>,
        /// Direction of the sweep about the vertical, radians. Defaults to the camera heading.
        #[arg(long, allow_hyphen_values = true)]
        azimuth: Option<f64>,
    },
    /// Classify visible nodes of paths.image; writes <output>.csv and an overlay <output>.png.
    Classify {
        /// Use a random default network with this seed instead of paths.network.
        #[arg(long, value_name = "SEED")]
        random_network: Option<u64>,
    },
    /// Time projection, sampling and inference per frame.
    Bench {
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        /// Seed for the random network used when paths.network is not set.
        #[arg(long, value_name = "SEED")]
        random_network: Option<u64>,
        /// Layers of the random network.
        #[arg(long, default_value_t = 9)]
        depth: usize,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

pub type Outcome = Result<(), Failure>;

pub trait ResultExt<T> {
    fn config_err(self) -> Result<T, Failure>;
    fn runtime_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn run(cli: Cli) -> Outcome {
    let config = RunConfig::resolve(&cli.overrides).config_err()?;
    match cli.command {
        Command::Generate => commands::generate(&config),
        Command::Project => commands::project(&config),
        Command::Density { distances, azimuth } => commands::density(&config, distances, azimuth),
        Command::Classify { random_network } => commands::classify(&config, random_network),
        Command::Bench { iterations, random_network, depth, json } => {
            commands::bench(&config, &BenchOptions { iterations, random: random_network, depth, json })
        }
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on bad arguments by itself.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
