use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{CostModel, LengthModel, UniverseConfig};
use crate::error::{Result, SimError};
use crate::metrics::RecordOptions;
use crate::strategies::StrategyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

/// How the policy learning rate scales with the batch size `b = m n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrScaling {
    #[default]
    Constant,
    /// `lr * sqrt(b / reference_batch)`.
    Sqrt { reference_batch: usize },
    /// `lr * b / reference_batch`.
    Linear { reference_batch: usize },
}

impl LrScaling {
    pub fn factor(&self, batch: usize) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::Sqrt { reference_batch } => (batch as f64 / reference_batch as f64).sqrt(),
            Self::Linear { reference_batch } => batch as f64 / reference_batch as f64,
        }
    }
}

/// Exactly one of the two limits must be set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    /// Simulated generation seconds; a step that would cross it is not taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sim_time_s: Option<f64>,
}

impl Budget {
    pub fn steps(n: u64) -> Self {
        Self { max_steps: Some(n), max_sim_time_s: None }
    }

    pub fn sim_time(s: f64) -> Self {
        Self { max_steps: None, max_sim_time_s: Some(s) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub universe: UniverseConfig,
    pub strategy: StrategyConfig,
    #[serde(default = "default_policy_lr")]
    pub policy_lr: f64,
    /// Used only when the strategy has a value model.
    #[serde(default = "default_value_lr")]
    pub value_lr: f64,
    #[serde(default = "default_value_epochs")]
    pub value_epochs: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub lr_scaling: LrScaling,
    pub budget: Budget,
    #[serde(default)]
    pub seed: u64,
    /// CSV path; a JSON sidecar is written next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub length: LengthModel,
    #[serde(default)]
    pub record: RecordOptions,
    /// Fixed simulated seconds charged per step for selection work. PCL's
    /// value-model forward passes cost nothing unless this is raised.
    #[serde(default)]
    pub selection_overhead_s: f64,
}

fn default_policy_lr() -> f64 {
    0.015
}

fn default_value_lr() -> f64 {
    0.05
}

fn default_value_epochs() -> usize {
    1
}

impl RunConfig {
    /// Defaults everywhere except the strategy and budget.
    pub fn new(strategy: StrategyConfig, budget: Budget) -> Self {
        Self {
            universe: UniverseConfig::default(),
            strategy,
            policy_lr: default_policy_lr(),
            value_lr: default_value_lr(),
            value_epochs: default_value_epochs(),
            optimizer: Optimizer::default(),
            lr_scaling: LrScaling::default(),
            budget,
            seed: 0,
            output: None,
            cost: CostModel::default(),
            length: LengthModel::default(),
            record: RecordOptions::default(),
            selection_overhead_s: 0.0,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.universe.validate()?;
        self.strategy.validate()?;
        self.cost.validate()?;
        self.length.validate()?;
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.policy_lr) {
            return Err(SimError::Config(format!("policy_lr must be positive, got {}", self.policy_lr)));
        }
        if !positive(self.value_lr) {
            return Err(SimError::Config(format!("value_lr must be positive, got {}", self.value_lr)));
        }
        if self.value_epochs == 0 {
            return Err(SimError::Config("value_epochs must be at least 1".into()));
        }
        match self.budget {
            Budget { max_steps: Some(_), max_sim_time_s: None } => {}
            Budget { max_steps: None, max_sim_time_s: Some(t) } if t >= 0.0 => {}
            Budget { max_steps: None, max_sim_time_s: Some(t) } => {
                return Err(SimError::Config(format!("max_sim_time_s must be non-negative, got {t}")));
            }
            _ => return Err(SimError::Config("set exactly one of budget.max_steps and budget.max_sim_time_s".into())),
        }
        match self.lr_scaling {
            LrScaling::Sqrt { reference_batch } | LrScaling::Linear { reference_batch } if reference_batch == 0 => {
                return Err(SimError::Config("lr_scaling.reference_batch must be at least 1".into()));
            }
            _ => {}
        }
        if !(self.selection_overhead_s >= 0.0 && self.selection_overhead_s.is_finite()) {
            return Err(SimError::Config("selection_overhead_s must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Policy learning rate after batch-size scaling.
    pub fn effective_policy_lr(&self) -> f64 {
        self.policy_lr * self.lr_scaling.factor(self.strategy.m * self.strategy.n)
    }
}
