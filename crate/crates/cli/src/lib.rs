//! Command-line front end: JSON experiment configuration, flag overrides and
//! the `region`, `admit`, `schedule-run` and `cellular` subcommands.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::{ExperimentConfig, Model, PolicyKind};

#[derive(Debug, Parser)]
#[command(
    name = "dcqos",
    version,
    about = "Deadline-constrained throughput regions, admission and scheduling"
)]
pub struct Cli {
    /// JSON experiment configuration; unset fields take the reference defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Contention model.
    #[arg(long, global = true, value_enum)]
    pub model: Option<Model>,
    /// Run seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Simulated frames.
    #[arg(long, global = true, value_name = "N")]
    pub frames: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the corner points of the rate region and a feasibility summary.
    Region,
    /// Decide whether a rate vector is admissible (exit 0 accept, 1 reject, 2 error).
    Admit {
        /// Comma-separated rates in packets per frame; defaults to the configured target.
        #[arg(long, value_name = "R1,R2,...")]
        rates: Option<String>,
    },
    /// Run the max-weight or proportional-fair scheduler over simulated frames.
    ScheduleRun {
        /// Scheduling policy; defaults to the configured one.
        #[arg(long, value_enum)]
        policy: Option<PolicyKind>,
    },
    /// Compare polling and extended models on a random cellular drop.
    Cellular,
}

impl Cli {
    /// The configuration file (or defaults) with the command-line overrides applied.
    pub fn resolve_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(model) = self.model {
            config.model = model;
        }
        if let Some(seed) = self.seed {
            config.simulation.seed = seed;
        }
        if let Some(frames) = self.frames {
            config.simulation.frames = frames;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Command::ScheduleRun { policy: Some(kind) } = self.command {
            config.policy.kind = kind;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Resolves the configuration and dispatches the subcommand.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let config = cli.resolve_config()?;
    match &cli.command {
        Command::Region => commands::region(&config),
        Command::Admit { rates } => {
            let rates = rates.as_deref().map(commands::parse_rates).transpose()?;
            commands::admit(&config, rates.as_deref())
        }
        Command::ScheduleRun { .. } => commands::schedule_run(&config),
        Command::Cellular => commands::cellular(&config),
    }
}
