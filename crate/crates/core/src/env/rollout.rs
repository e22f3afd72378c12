//! Rollout groups, the length model and rollout sampling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::policy::PolicyState;
use crate::env::rng::{Purpose, Streams};
use crate::env::universe::PromptSpec;

/// One response, abstracted to its reward and token length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub reward: u8,
    pub length: u32,
    /// Policy step under which this rollout was drawn.
    pub sampled_at_step: u64,
    /// Success probability of the sampling policy on this prompt.
    pub sampling_prob: f64,
}

/// The `n` rollouts of one prompt together with their group-mean advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub prompt_id: u64,
    rollouts: Vec<Rollout>,
    mean_reward: f64,
    advantages: Vec<f64>,
}

impl RolloutGroup {
    /// # Panics
    /// If `rollouts` is empty or a reward is not 0/1.
    pub fn new(prompt_id: u64, rollouts: Vec<Rollout>) -> Self {
        assert!(!rollouts.is_empty(), "a rollout group needs at least one rollout");
        assert!(rollouts.iter().all(|r| r.reward <= 1), "rewards are binary");
        let successes: u32 = rollouts.iter().map(|r| r.reward as u32).sum();
        let mean_reward = successes as f64 / rollouts.len() as f64;
        let advantages = rollouts.iter().map(|r| r.reward as f64 - mean_reward).collect();
        Self { prompt_id, rollouts, mean_reward, advantages }
    }

    pub fn n(&self) -> usize {
        self.rollouts.len()
    }

    pub fn rollouts(&self) -> &[Rollout] {
        &self.rollouts
    }

    pub fn rewards(&self) -> impl Iterator<Item = u8> + '_ {
        self.rollouts.iter().map(|r| r.reward)
    }

    pub fn lengths(&self) -> impl Iterator<Item = u32> + '_ {
        self.rollouts.iter().map(|r| r.length)
    }

    pub fn successes(&self) -> usize {
        self.rollouts.iter().filter(|r| r.reward == 1).count()
    }

    /// Empirical mean reward `p_hat`.
    pub fn mean_reward(&self) -> f64 {
        self.mean_reward
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    /// All rewards equal (every advantage is zero).
    pub fn is_unanimous(&self) -> bool {
        let s = self.successes();
        s == 0 || s == self.n()
    }

    /// Oldest policy step among the rollouts.
    pub fn sampled_at_step(&self) -> u64 {
        self.rollouts.iter().map(|r| r.sampled_at_step).min().expect("non-empty")
    }

    pub fn newest_step(&self) -> u64 {
        self.rollouts.iter().map(|r| r.sampled_at_step).max().expect("non-empty")
    }

    /// Concatenate rollouts of the same prompt into a new group.
    pub fn extended(&self, more: impl IntoIterator<Item = Rollout>) -> Self {
        let mut rollouts = self.rollouts.clone();
        rollouts.extend(more);
        Self::new(self.prompt_id, rollouts)
    }
}

/// Response-length model:
/// `clamp(round(L0 * (1 + difficulty_coef * softplus(d) + incorrect_coef * (1 - r)) * exp(log_noise_std * Z)), 1, L_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LengthModel {
    pub difficulty_coef: f64,
    pub incorrect_coef: f64,
    pub log_noise_std: f64,
}

impl Default for LengthModel {
    fn default() -> Self {
        Self { difficulty_coef: 0.3, incorrect_coef: 0.5, log_noise_std: 0.25 }
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl LengthModel {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if ok(self.difficulty_coef) && ok(self.incorrect_coef) && ok(self.log_noise_std) {
            Ok(())
        } else {
            Err(crate::SimError::Config("length model coefficients must be finite and >= 0".into()))
        }
    }

    /// Length before noise and clamping.
    pub fn mean_factor(&self, prompt: &PromptSpec, reward: u8) -> f64 {
        1.0 + self.difficulty_coef * softplus(prompt.difficulty)
            + self.incorrect_coef * (1.0 - reward as f64)
    }
}

/// Draw one response length for `prompt` given its reward.
pub fn sample_length<R: Rng + ?Sized>(
    prompt: &PromptSpec,
    reward: u8,
    model: &LengthModel,
    context_limit: u32,
    rng: &mut R,
) -> u32 {
    let noise = if model.log_noise_std > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        (model.log_noise_std * z).exp()
    } else {
        1.0
    };
    let raw = (prompt.base_length as f64 * model.mean_factor(prompt, reward) * noise).round();
    raw.clamp(1.0, context_limit.max(1) as f64) as u32
}

/// Everything needed to turn (policy, prompt) into rollouts.
#[derive(Debug, Clone)]
pub struct RolloutSampler {
    pub streams: Streams,
    pub length_model: LengthModel,
    pub context_limit: u32,
}

impl RolloutSampler {
    pub fn new(streams: Streams, length_model: LengthModel, context_limit: u32) -> Self {
        Self { streams, length_model, context_limit }
    }

    /// Rollouts with indices `indices` for `prompt` under `policy`, drawn from
    /// the substreams `(purpose, policy.step, round, prompt.id, index)`.
    pub fn rollouts(
        &self,
        policy: &PolicyState,
        prompt: &PromptSpec,
        indices: std::ops::Range<usize>,
        purpose: Purpose,
        round: u64,
    ) -> Vec<Rollout> {
        let p = policy.success_prob(prompt);
        indices
            .map(|j| {
                let mut rng = self
                    .streams
                    .substream(purpose, &[policy.step, round, prompt.id, j as u64]);
                let reward = (rng.random::<f64>() < p) as u8;
                let length =
                    sample_length(prompt, reward, &self.length_model, self.context_limit, &mut rng);
                Rollout { reward, length, sampled_at_step: policy.step, sampling_prob: p }
            })
            .collect()
    }

    /// A full training group of `n` rollouts.
    pub fn group(&self, policy: &PolicyState, prompt: &PromptSpec, n: usize, round: u64) -> RolloutGroup {
        assert!(n >= 1, "n must be at least 1");
        RolloutGroup::new(prompt.id, self.rollouts(policy, prompt, 0..n, Purpose::Rollout, round))
    }
}

/// `n` Bernoulli(success_prob) rollouts for `prompt` under `policy`.
pub fn sample_rollout_group(
    policy: &PolicyState,
    prompt: &PromptSpec,
    n: usize,
    sampler: &RolloutSampler,
    round: u64,
) -> RolloutGroup {
    sampler.group(policy, prompt, n, round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prompt(d: f64) -> PromptSpec {
        PromptSpec { id: 3, difficulty: d, features: vec![1.0, d], base_length: 500 }
    }

    fn rollout(reward: u8) -> Rollout {
        Rollout { reward, length: 10, sampled_at_step: 0, sampling_prob: 0.5 }
    }

    #[test]
    fn group_arithmetic() {
        let g = RolloutGroup::new(0, [1, 0, 1, 1].into_iter().map(rollout).collect());
        assert_eq!(g.mean_reward(), 0.75);
        assert_eq!(g.advantages(), &[0.25, -0.75, 0.25, 0.25]);
        assert_eq!(g.advantages().iter().sum::<f64>(), 0.0);
        assert!(!g.is_unanimous());
    }

    #[test]
    fn forced_success_gives_unanimous_group() {
        let sampler = RolloutSampler::new(Streams::new(1), LengthModel::default(), 4096);
        let g = sampler.group(&PolicyState::zeros(2), &prompt(-1e9), 16, 0);
        assert!(g.rewards().all(|r| r == 1));
        assert!(g.advantages().iter().all(|&a| a == 0.0));
        assert!(g.is_unanimous());
    }

    #[test]
    fn group_mean_is_unbiased() {
        let sampler = RolloutSampler::new(Streams::new(9), LengthModel::default(), 4096);
        let policy = PolicyState::zeros(2);
        let p = prompt(0.0);
        let groups = 100_000u64;
        let total: f64 = (0..groups).map(|r| sampler.group(&policy, &p, 16, r).mean_reward()).sum();
        let mean = total / groups as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }

    #[test]
    fn constant_length_model() {
        let m = LengthModel { difficulty_coef: 0.0, incorrect_coef: 0.0, log_noise_std: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for r in [0, 1] {
            assert_eq!(sample_length(&prompt(2.0), r, &m, 4096, &mut rng), 500);
        }
    }

    #[test]
    fn incorrect_rollouts_are_longer_on_average() {
        let m = LengthModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = prompt(3.0);
        let draws = 20_000;
        let mean = |reward: u8, rng: &mut ChaCha8Rng| {
            (0..draws).map(|_| sample_length(&p, reward, &m, 1 << 20, rng) as f64).sum::<f64>() / draws as f64
        };
        let wrong = mean(0, &mut rng);
        let right = mean(1, &mut rng);
        assert!(wrong > right * 1.1, "wrong {wrong} right {right}");
    }

    #[test]
    fn lengths_are_clamped() {
        let m = LengthModel { log_noise_std: 3.0, ..LengthModel::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tiny = PromptSpec { base_length: 1, ..prompt(-5.0) };
        for _ in 0..2000 {
            let l = sample_length(&prompt(1.0), 0, &m, 700, &mut rng);
            assert!((1..=700).contains(&l));
            let l = sample_length(&tiny, 1, &m, 700, &mut rng);
            assert!((1..=700).contains(&l));
        }
    }
}
