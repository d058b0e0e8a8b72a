//! JSON experiment configuration. Every field has a default, so an empty
//! object (or no file at all) describes the two-user reference experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dcqos::{ChannelParams, DropParams, FrameConfig, RateVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// One user addressed per slot.
    Polling,
    /// Users may be addressed together in multicast contention groups.
    Extended,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Polling => "polling",
            Model::Extended => "extended",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Virtual-queue max-weight towards a target rate vector.
    Maxweight,
    /// Proportional-fair gradient scheduler.
    Pf,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Maxweight => "maxweight",
            PolicyKind::Pf => "pf",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleCaps {
    /// Longest polling schedule; `None` means every user.
    pub max_len: Option<usize>,
    /// Largest contention group in the extended model; `None` means every user.
    pub max_group_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Max-weight target, packets per frame per user.
    pub target: Vec<f64>,
    pub ewma_weight: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Maxweight,
            target: vec![0.6, 0.5],
            ewma_weight: dcqos::schedulers::DEFAULT_EWMA_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub frames: u64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            frames: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellularConfig {
    pub drop: DropParams,
    /// Slots per frame in the cellular run.
    pub slots: FrameConfig,
    /// Explicit user positions `(x, y)` in meters; drawn from the seed when absent.
    pub positions: Option<Vec<(f64, f64)>>,
}

impl Default for CellularConfig {
    fn default() -> Self {
        Self {
            drop: DropParams::default(),
            slots: FrameConfig::new(30).expect("positive"),
            positions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: Model,
    pub channel: ChannelParams,
    pub frame: FrameConfig,
    pub schedule_caps: ScheduleCaps,
    pub policy: PolicyConfig,
    pub simulation: SimulationConfig,
    pub cellular: CellularConfig,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::Polling,
            channel: ChannelParams::new(vec![0.3, 0.2]).expect("valid probabilities"),
            frame: FrameConfig::new(4).expect("positive"),
            schedule_caps: ScheduleCaps::default(),
            policy: PolicyConfig::default(),
            simulation: SimulationConfig::default(),
            cellular: CellularConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Self = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks the cross-field constraints the individual types cannot.
    pub fn validate(&self) -> anyhow::Result<()> {
        let n = self.channel.n_users();
        if let Some(len) = self.schedule_caps.max_len {
            if len > n {
                bail!("schedule_caps.max_len {len} exceeds the {n} users");
            }
        }
        if let Some(size) = self.schedule_caps.max_group_size {
            if size == 0 || size > n {
                bail!("schedule_caps.max_group_size {size} must be between 1 and {n}");
            }
        }
        if self.simulation.frames == 0 {
            bail!("simulation.frames must be at least 1");
        }
        if !(self.policy.ewma_weight > 0.0 && self.policy.ewma_weight <= 1.0) {
            bail!("policy.ewma_weight must lie in (0, 1]");
        }
        if let Some(positions) = &self.cellular.positions {
            if positions.len() != self.cellular.drop.n_users {
                bail!(
                    "cellular.positions has {} entries but cellular.drop.n_users is {}",
                    positions.len(),
                    self.cellular.drop.n_users
                );
            }
        }
        Ok(())
    }

    /// The max-weight target, checked against the channel dimension.
    pub fn target(&self) -> anyhow::Result<RateVector> {
        let n = self.channel.n_users();
        if self.policy.target.len() != n {
            bail!("policy.target has {} entries for {n} users", self.policy.target.len());
        }
        Ok(RateVector::new(self.policy.target.clone())?)
    }

    pub fn max_len(&self) -> usize {
        self.schedule_caps.max_len.unwrap_or(self.channel.n_users())
    }

    pub fn max_group_size(&self) -> usize {
        self.schedule_caps.max_group_size.unwrap_or(self.channel.n_users())
    }
}
