//! Prompt-selection strategies.
//!
//! Each selector turns the current policy (and, for some, carried state) into
//! a training batch of exactly `m` groups of `n` rollouts, and reports what it
//! cost to build it.

mod ds;
mod greedy;
mod greso;
mod oracle;
mod pcl;
mod prefilter;
mod speed;
mod uniform;

pub use ds::select_ds;
pub use greedy::greedy_downsample;
pub use greso::{select_greso, GresoState};
pub use oracle::oracle_difficulty_select;
pub use pcl::select_pcl;
pub use prefilter::prefilter_universe;
pub use speed::{select_speed, SpeedState};
pub use uniform::select_uniform;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{CostModel, PolicyState, PromptSpec, PromptUniverse, Purpose, RolloutGroup, RolloutSampler};
use crate::error::{Result, SimError};

/// Sampling rounds a resampling strategy may use before giving up.
pub const MAX_SAMPLING_ROUNDS: usize = 64;

/// Strategy plus the shared batch shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    /// Prompts per training batch.
    pub m: usize,
    /// Rollouts per prompt.
    pub n: usize,
    #[serde(flatten)]
    pub kind: StrategyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Uniform,
    PreFilter {
        n_pre: usize,
        p_low: f64,
        p_high: f64,
    },
    Ds {
        k: usize,
    },
    Speed {
        k: usize,
        n_init: usize,
    },
    Greso {
        p_easy: f64,
        p_hard: f64,
        alpha_easy: f64,
        alpha_hard: f64,
        delta_p: f64,
        /// Candidates examined per sampling round.
        replay_batch: usize,
        /// Share of unanimous-correct groups per epoch that the skip
        /// probabilities are steered toward.
        #[serde(default = "default_target_easy")]
        target_easy: f64,
        #[serde(default = "default_target_hard")]
        target_hard: f64,
    },
    Pcl {
        k: usize,
        tau: f64,
    },
    /// Probe-based difficulty targeting: `probes` rollouts on each of
    /// `oversample * m` candidates, then greedy downsampling to `target`.
    OracleDifficulty {
        oversample: usize,
        probes: usize,
        target: f64,
    },
}

fn default_target_easy() -> f64 {
    0.25 / 3.0
}

fn default_target_hard() -> f64 {
    0.5 / 3.0
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::PreFilter { .. } => "pre_filter",
            Self::Ds { .. } => "ds",
            Self::Speed { .. } => "speed",
            Self::Greso { .. } => "greso",
            Self::Pcl { .. } => "pcl",
            Self::OracleDifficulty { .. } => "oracle_difficulty",
        }
    }

    pub fn greso_defaults(m: usize) -> Self {
        Self::Greso {
            p_easy: 0.5,
            p_hard: 0.5,
            alpha_easy: 0.083,
            alpha_hard: 0.167,
            delta_p: 0.01,
            replay_batch: m * 3 / 2,
            target_easy: default_target_easy(),
            target_hard: default_target_hard(),
        }
    }
}

impl StrategyConfig {
    pub fn new(m: usize, n: usize, kind: StrategyKind) -> Self {
        Self { m, n, kind }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2 for a group baseline, got {}", self.n));
        }
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        match self.kind {
            StrategyKind::Uniform => {}
            StrategyKind::PreFilter { n_pre, p_low, p_high } => {
                if n_pre == 0 {
                    return bad("n_pre must be at least 1".into());
                }
                if !(prob(p_low) && prob(p_high) && p_low < p_high) {
                    return bad(format!("need 0 <= p_low < p_high <= 1, got {p_low}, {p_high}"));
                }
            }
            StrategyKind::Ds { k } => {
                if k == 0 {
                    return bad("k must be at least 1".into());
                }
            }
            StrategyKind::Speed { k, n_init } => {
                if k == 0 {
                    return bad("k must be at least 1".into());
                }
                if n_init == 0 || n_init > self.n {
                    return bad(format!("need 1 <= n_init <= n, got n_init={n_init}"));
                }
            }
            StrategyKind::Greso { p_easy, p_hard, alpha_easy, alpha_hard, delta_p, replay_batch, target_easy, target_hard } => {
                if ![p_easy, p_hard, delta_p, target_easy, target_hard].into_iter().all(prob) {
                    return bad("GRESO probabilities must lie in [0, 1]".into());
                }
                if !(alpha_easy >= 0.0 && alpha_hard >= 0.0) {
                    return bad("GRESO adaptation steps must be non-negative".into());
                }
                if replay_batch == 0 {
                    return bad("replay_batch must be at least 1".into());
                }
            }
            StrategyKind::Pcl { k, tau } => {
                if k == 0 {
                    return bad("k must be at least 1".into());
                }
                if !prob(tau) {
                    return bad(format!("tau must lie in [0, 1], got {tau}"));
                }
            }
            StrategyKind::OracleDifficulty { oversample, probes, target } => {
                if oversample == 0 || probes == 0 {
                    return bad("oversample and probes must be at least 1".into());
                }
                if !prob(target) {
                    return bad(format!("target must lie in [0, 1], got {target}"));
                }
            }
        }
        Ok(())
    }
}

/// A training batch and the accounting of how it was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub batch: Vec<RolloutGroup>,
    /// `m * n` plus every rollout generated and not trained on.
    pub generated_rollouts_total: usize,
    pub wasted_rollouts: usize,
    pub selected_prompt_ids: Vec<u64>,
    /// Per-candidate selection scores, where the strategy computes them.
    pub filter_scores: Option<Vec<f64>>,
    /// Every candidate prompt considered before filtering.
    pub candidate_ids: Vec<u64>,
    /// Rollouts actually generated during this call.
    pub fresh_rollouts: usize,
    /// Simulated generation seconds spent during this call.
    pub generation_time_s: f64,
    pub rounds: usize,
    /// Screening or probe groups whose rewards were unanimous.
    pub unanimous_screens: usize,
}

impl SelectionResult {
    /// Mean of `current_step - sampled_at_step` over all trained rollouts.
    pub fn mean_staleness(&self, current_step: u64) -> f64 {
        let (sum, count) = self.batch.iter().flat_map(|g| g.rollouts()).fold((0u64, 0u64), |(s, c), r| {
            (s + current_step.saturating_sub(r.sampled_at_step), c + 1)
        });
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    }
}

/// Read-only inputs shared by all selectors for one step.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub universe: &'a PromptUniverse,
    pub policy: &'a PolicyState,
    pub sampler: &'a RolloutSampler,
    pub cost: &'a CostModel,
}

impl<'a> SelectionContext<'a> {
    /// `count` distinct prompts drawn uniformly for `(policy.step, round)`.
    pub fn candidates(&self, count: usize, round: u64) -> Result<Vec<&'a PromptSpec>> {
        let prompts = self.universe.prompts();
        if count > prompts.len() {
            return Err(SimError::Config(format!(
                "candidate pool of {count} exceeds the universe size {}",
                prompts.len()
            )));
        }
        let mut rng = self.sampler.streams.substream(Purpose::Candidates, &[self.policy.step, round]);
        Ok(index::sample(&mut rng, prompts.len(), count).into_iter().map(|i| &prompts[i]).collect())
    }

    /// Full groups of `n` training rollouts for each prompt.
    pub fn generate(&self, prompts: &[&PromptSpec], n: usize, round: u64) -> Vec<RolloutGroup> {
        prompts
            .par_iter()
            .map(|p| self.sampler.group(self.policy, p, n, round))
            .collect()
    }

    /// Groups of `n` rollouts drawn from a non-training purpose (probes).
    pub fn generate_with(&self, prompts: &[&PromptSpec], n: usize, purpose: Purpose, round: u64) -> Vec<RolloutGroup> {
        prompts
            .par_iter()
            .map(|p| RolloutGroup::new(p.id, self.sampler.rollouts(self.policy, p, 0..n, purpose, round)))
            .collect()
    }

    pub fn time_of(&self, groups: &[RolloutGroup]) -> f64 {
        self.cost.generation_time(groups.iter().flat_map(|g| g.lengths()))
    }
}
