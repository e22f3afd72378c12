//! Synthetic prompt universes with known latent difficulty.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::rng::{Purpose, Streams};
use crate::error::{Result, SimError};

/// One synthetic prompt.
///
/// `difficulty` is in logit units: a policy with zero parameters solves the
/// prompt with probability `sigmoid(-difficulty)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: u64,
    pub difficulty: f64,
    /// Feature vector; entry 0 is the bias and is always exactly 1.
    pub features: Vec<f64>,
    /// Base response length in tokens.
    pub base_length: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Generating distribution for latent difficulties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DifficultyDistribution {
    Constant { value: f64 },
    Normal { mean: f64, std: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

impl DifficultyDistribution {
    fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(SimError::Config(format!("difficulty {what} must be finite")))
            }
        };
        match self {
            Self::Constant { value } => finite(*value, "value"),
            Self::Normal { mean, std } => {
                finite(*mean, "mean")?;
                if !(*std > 0.0 && std.is_finite()) {
                    return Err(SimError::Config(format!(
                        "difficulty std must be positive, got {std}"
                    )));
                }
                Ok(())
            }
            Self::Mixture { components } => {
                if components.is_empty() {
                    return Err(SimError::Config("mixture needs at least one component".into()));
                }
                for c in components {
                    finite(c.mean, "mean")?;
                    if !(c.weight > 0.0 && c.weight.is_finite()) {
                        return Err(SimError::Config("mixture weights must be positive".into()));
                    }
                    if !(c.std > 0.0 && c.std.is_finite()) {
                        return Err(SimError::Config(format!(
                            "mixture component std must be positive, got {}",
                            c.std
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Normal { mean, std } => Normal::new(*mean, *std).expect("validated").sample(rng),
            Self::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u = rng.random::<f64>() * total;
                let mut chosen = components[components.len() - 1];
                for c in components {
                    if u < c.weight {
                        chosen = *c;
                        break;
                    }
                    u -= c.weight;
                }
                Normal::new(chosen.mean, chosen.std).expect("validated").sample(rng)
            }
        }
    }
}

/// Base-length profile: `L0 = round(mean * exp(log_std * Z))`, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LengthProfile {
    pub mean: f64,
    pub log_std: f64,
}

impl Default for LengthProfile {
    fn default() -> Self {
        Self { mean: 400.0, log_std: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniverseConfig {
    pub num_prompts: usize,
    pub feature_dim: usize,
    pub difficulty: DifficultyDistribution,
    /// Std of the noise added to difficulty in feature 1.
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
    /// Multiplier on feature 1. Smaller values slow how fast a linear policy
    /// can learn to cancel difficulty.
    pub feature_scale: f64,
    #[serde(default)]
    pub length: LengthProfile,
}

fn default_feature_noise() -> f64 {
    0.5
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            num_prompts: 2000,
            feature_dim: 8,
            difficulty: DifficultyDistribution::Normal { mean: 0.0, std: 1.5 },
            feature_noise: default_feature_noise(),
            feature_scale: 0.3,
            length: LengthProfile::default(),
        }
    }
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_prompts == 0 {
            return Err(SimError::Config("universe needs at least one prompt".into()));
        }
        if self.feature_dim == 0 {
            return Err(SimError::Config("feature_dim must be at least 1".into()));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(SimError::Config("feature_noise must be finite and non-negative".into()));
        }
        if !(self.feature_scale > 0.0 && self.feature_scale.is_finite()) {
            return Err(SimError::Config("feature_scale must be finite and positive".into()));
        }
        if !(self.length.mean >= 1.0 && self.length.mean.is_finite()) {
            return Err(SimError::Config("length.mean must be at least 1".into()));
        }
        if !(self.length.log_std >= 0.0 && self.length.log_std.is_finite()) {
            return Err(SimError::Config("length.log_std must be non-negative".into()));
        }
        self.difficulty.validate()
    }
}

/// An immutable, id-sorted collection of prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptUniverse {
    prompts: Vec<PromptSpec>,
    config: UniverseConfig,
}

impl PromptUniverse {
    /// Builds a universe from explicit prompts. Prompts are sorted by id; ids
    /// must be unique, every feature vector must have `feature_dim` finite
    /// entries and start with 1.
    pub fn from_prompts(mut prompts: Vec<PromptSpec>, config: UniverseConfig) -> Result<Self> {
        if prompts.is_empty() {
            return Err(SimError::Config("universe needs at least one prompt".into()));
        }
        prompts.sort_by_key(|p| p.id);
        if prompts.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(SimError::Config("prompt ids must be unique".into()));
        }
        let dim = config.feature_dim;
        for p in &prompts {
            if p.features.len() != dim {
                return Err(SimError::DimensionMismatch { expected: dim, got: p.features.len() });
            }
            if p.features[0] != 1.0 || p.features.iter().any(|x| !x.is_finite()) {
                return Err(SimError::Config(format!(
                    "prompt {}: features must be finite with a unit bias",
                    p.id
                )));
            }
            if p.base_length == 0 || !p.difficulty.is_finite() {
                return Err(SimError::Config(format!("prompt {}: invalid length or difficulty", p.id)));
            }
        }
        Ok(Self { prompts, config })
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn config(&self) -> &UniverseConfig {
        &self.config
    }

    pub fn prompts(&self) -> &[PromptSpec] {
        &self.prompts
    }

    pub fn get(&self, id: u64) -> Option<&PromptSpec> {
        self.prompts
            .binary_search_by_key(&id, |p| p.id)
            .ok()
            .map(|i| &self.prompts[i])
    }

    /// Like [`get`](Self::get) but treats a missing id as a broken invariant.
    pub fn prompt(&self, id: u64) -> &PromptSpec {
        self.get(id)
            .unwrap_or_else(|| panic!("prompt id {id} is not part of this universe"))
    }

    /// A new universe holding only the prompts for which `keep` is true.
    pub fn retain(&self, mut keep: impl FnMut(&PromptSpec) -> bool) -> Option<Self> {
        let prompts: Vec<_> = self.prompts.iter().filter(|p| keep(p)).cloned().collect();
        if prompts.is_empty() {
            return None;
        }
        Some(Self { prompts, config: self.config.clone() })
    }
}

/// Draws a universe. Deterministic in `(config, seed)`.
///
/// Feature 1 is `feature_scale * (difficulty + feature_noise * Z)`, features 2.. are standard
/// normal distractors, so a model over the features can learn difficulty up
/// to the configured noise.
pub fn make_universe(config: &UniverseConfig, seed: u64) -> Result<PromptUniverse> {
    config.validate()?;
    let streams = Streams::new(seed);
    let prompts = (0..config.num_prompts as u64)
        .map(|id| {
            let mut rng = streams.substream(Purpose::Universe, &[id]);
            let difficulty = config.difficulty.sample(&mut rng);
            let mut features = Vec::with_capacity(config.feature_dim);
            features.push(1.0);
            if config.feature_dim >= 2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(config.feature_scale * (difficulty + config.feature_noise * z));
            }
            while features.len() < config.feature_dim {
                features.push(StandardNormal.sample(&mut rng));
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            let base_length = (config.length.mean * (config.length.log_std * z).exp()).round().max(1.0);
            PromptSpec {
                id,
                difficulty,
                features,
                base_length: base_length.min(u32::MAX as f64) as u32,
            }
        })
        .collect();
    PromptUniverse::from_prompts(prompts, config.clone())
}
