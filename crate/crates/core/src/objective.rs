//! Purely on-policy GRPO: group-mean advantages, the sequence-level gradient
//! estimator, its analytic expectation for the logistic policy, and parameter
//! updates.
//!
//! Rollouts are (reward, length) pairs, so the per-token importance ratio is
//! identically one at sampling time and the `1/|y|` normalisation collapses to
//! one action per rollout. For the logistic policy
//! `grad log pi(y|x) = (r - p) * phi(x)`.

use serde::{Deserialize, Serialize};

use crate::env::{PolicyState, PromptSpec, PromptUniverse, Rollout, RolloutGroup};
use crate::error::{Result, SimError};

/// `A_j = r_j - p_hat` for one group. No standard-deviation scaling.
pub fn advantages(group: &RolloutGroup) -> Vec<f64> {
    let p_hat = group.mean_reward();
    group.rewards().map(|r| r as f64 - p_hat).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub gradient: Vec<f64>,
    /// Rollouts with a nonzero advantage.
    pub contributing_rollouts: usize,
    pub batch_id: u64,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// How the estimator treats rollouts drawn under an older policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Staleness {
    /// Any rollout not drawn at `policy.step` is an error.
    Reject,
    /// Stale rollouts are used as if drawn from the current policy.
    Accept,
}

/// Contribution of one group to the batch gradient, before the `1/(m n)` scale.
fn accumulate_group(policy: &PolicyState, prompt: &PromptSpec, group: &RolloutGroup, acc: &mut [f64]) -> usize {
    let p = policy.success_prob(prompt);
    let mut weight = 0.0;
    let mut contributing = 0;
    for (rollout, &a) in group.rollouts().iter().zip(group.advantages()) {
        if a != 0.0 {
            contributing += 1;
            weight += a * (rollout.reward as f64 - p);
        }
    }
    if weight != 0.0 {
        for (g, x) in acc.iter_mut().zip(&prompt.features) {
            *g += weight * x;
        }
    }
    contributing
}

/// `g = 1/(m n) * sum_i sum_j A_ij * grad log pi(y_ij | x_i)`.
///
/// Unanimous groups contribute exactly zero.
pub fn grpo_gradient_estimate(
    policy: &PolicyState,
    universe: &PromptUniverse,
    batch: &[RolloutGroup],
    batch_id: u64,
    staleness: Staleness,
) -> Result<GradientEstimate> {
    let mut gradient = vec![0.0; policy.dim()];
    let mut contributing_rollouts = 0;
    let mut total = 0usize;
    for group in batch {
        if staleness == Staleness::Reject {
            if let Some(r) = group.rollouts().iter().find(|r| r.sampled_at_step != policy.step) {
                return Err(SimError::Stale {
                    prompt_id: group.prompt_id,
                    sampled_at: r.sampled_at_step,
                    policy_step: policy.step,
                });
            }
        }
        let prompt = universe.prompt(group.prompt_id);
        if prompt.features.len() != gradient.len() {
            return Err(SimError::DimensionMismatch { expected: gradient.len(), got: prompt.features.len() });
        }
        contributing_rollouts += accumulate_group(policy, prompt, group, &mut gradient);
        total += group.n();
    }
    if total > 0 {
        let scale = 1.0 / total as f64;
        gradient.iter_mut().for_each(|g| *g *= scale);
    }
    Ok(GradientEstimate { gradient, contributing_rollouts, batch_id })
}

/// `E[g]` for a single prompt and group size `n`, by summing the estimator
/// over all `2^n` reward outcomes weighted by their probabilities.
///
/// # Panics
/// If `n` is 0 or above 20.
pub fn enumerated_expected_gradient(policy: &PolicyState, prompt: &PromptSpec, n: usize) -> Vec<f64> {
    assert!((1..=20).contains(&n), "enumeration supports 1 <= n <= 20");
    let p = policy.success_prob(prompt);
    let universe = PromptUniverse::from_prompts(
        vec![prompt.clone()],
        crate::env::UniverseConfig { num_prompts: 1, feature_dim: prompt.features.len(), ..Default::default() },
    )
    .expect("a single valid prompt");
    let mut expected = vec![0.0; prompt.features.len()];
    for mask in 0u32..(1 << n) {
        let rollouts: Vec<Rollout> = (0..n)
            .map(|j| Rollout { reward: ((mask >> j) & 1) as u8, length: 1, sampled_at_step: policy.step, sampling_prob: p })
            .collect();
        let k = mask.count_ones() as i32;
        let weight = p.powi(k) * (1.0 - p).powi(n as i32 - k);
        let batch = [RolloutGroup::new(prompt.id, rollouts)];
        let g = grpo_gradient_estimate(policy, &universe, &batch, 0, Staleness::Reject).expect("on-policy batch");
        for (e, x) in expected.iter_mut().zip(&g.gradient) {
            *e += weight * x;
        }
    }
    expected
}

/// Exact `grad_theta E[r] = p (1 - p) phi` for the logistic policy.
pub fn analytic_gradient(policy: &PolicyState, prompt: &PromptSpec) -> Vec<f64> {
    let p = policy.success_prob(prompt);
    let w = p * (1.0 - p);
    prompt.features.iter().map(|x| w * x).collect()
}

fn check_update(policy: &PolicyState, g: &GradientEstimate, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(SimError::Config(format!("learning rate must be positive, got {lr}")));
    }
    if g.gradient.len() != policy.dim() {
        return Err(SimError::DimensionMismatch { expected: policy.dim(), got: g.gradient.len() });
    }
    if let Some(i) = g.gradient.iter().position(|x| !x.is_finite()) {
        return Err(SimError::NonFinite(format!(
            "gradient component {i} is {} in batch {}; update rejected",
            g.gradient[i], g.batch_id
        )));
    }
    Ok(())
}

/// Plain gradient ascent: `theta' = theta + lr * g`, `step' = step + 1`.
pub fn policy_update(policy: &PolicyState, g: &GradientEstimate, lr: f64) -> Result<PolicyState> {
    check_update(policy, g, lr)?;
    let theta = policy.theta.iter().zip(&g.gradient).map(|(t, d)| t + lr * d).collect();
    Ok(PolicyState { theta, step: policy.step + 1 })
}

/// Adam-style ascent. Off by default; keeps its own moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, first: vec![0.0; dim], second: vec![0.0; dim], t: 0 }
    }

    pub fn update(&mut self, policy: &PolicyState, g: &GradientEstimate, lr: f64) -> Result<PolicyState> {
        check_update(policy, g, lr)?;
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut theta = policy.theta.clone();
        #[allow(clippy::needless_range_loop)]
        for i in 0..theta.len() {
            let gi = g.gradient[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * gi;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * gi * gi;
            theta[i] += lr * (self.first[i] / c1) / ((self.second[i] / c2).sqrt() + self.eps);
        }
        Ok(PolicyState { theta, step: policy.step + 1 })
    }
}

/// Share of rollouts with a nonzero advantage.
///
/// # Panics
/// On an empty batch.
pub fn effective_ratio(batch: &[RolloutGroup]) -> f64 {
    let total: usize = batch.iter().map(|g| g.n()).sum();
    assert!(total > 0, "effective_ratio needs a non-empty batch");
    let nonzero: usize = batch
        .iter()
        .map(|g| g.advantages().iter().filter(|&&a| a != 0.0).count())
        .sum();
    nonzero as f64 / total as f64
}

/// `E_y[A(x, y)^2] = p (1 - p)` for a binary reward with success probability `p`.
///
/// # Panics
/// If `p` lies outside `[0, 1]`.
pub fn expected_sq_advantage(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p must be a probability, got {p}");
    p * (1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::UniverseConfig;

    fn group(id: u64, rewards: &[u8], step: u64) -> RolloutGroup {
        RolloutGroup::new(
            id,
            rewards
                .iter()
                .map(|&reward| Rollout { reward, length: 1, sampled_at_step: step, sampling_prob: 0.5 })
                .collect(),
        )
    }

    fn universe(difficulty: f64, phi: Vec<f64>) -> PromptUniverse {
        let dim = phi.len();
        PromptUniverse::from_prompts(
            vec![PromptSpec { id: 0, difficulty, features: phi, base_length: 10 }],
            UniverseConfig { num_prompts: 1, feature_dim: dim, ..UniverseConfig::default() },
        )
        .unwrap()
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(advantages(&group(0, &[1, 1, 1, 1], 0)), vec![0.0; 4]);
        assert_eq!(advantages(&group(0, &[0, 1], 0)), vec![-0.5, 0.5]);
        assert_eq!(advantages(&group(0, &[1, 0, 1, 1], 0)), vec![0.25, -0.75, 0.25, 0.25]);
        let g = group(0, &[1, 0, 0, 1, 1], 0);
        assert_eq!(advantages(&g), g.advantages());
    }

    #[test]
    fn unanimous_batch_has_zero_gradient() {
        let u = universe(0.3, vec![1.0, 2.0]);
        let policy = PolicyState::zeros(2);
        let est = grpo_gradient_estimate(&policy, &u, &[group(0, &[0, 0], 0)], 0, Staleness::Reject).unwrap();
        assert_eq!(est.gradient, vec![0.0, 0.0]);
        assert_eq!(est.contributing_rollouts, 0);
    }

    #[test]
    fn mixed_pair_contributes_quarter_phi() {
        // for n = 2 a mixed group gives 1/2 * (0.5 (1-p) + 0.5 p) phi = 0.25 phi
        let u = universe(-(0.6f64 / 0.4).ln(), vec![1.0]);
        let policy = PolicyState::zeros(1);
        let est = grpo_gradient_estimate(&policy, &u, &[group(0, &[1, 0], 0)], 0, Staleness::Reject).unwrap();
        assert!((est.gradient[0] - 0.25).abs() < 1e-15);
        assert_eq!(est.contributing_rollouts, 2);
    }

    #[test]
    fn stale_group_rejected_unless_accepted() {
        let u = universe(0.0, vec![1.0]);
        let policy = PolicyState { theta: vec![0.0], step: 3 };
        let batch = [group(0, &[1, 0], 2)];
        assert!(matches!(
            grpo_gradient_estimate(&policy, &u, &batch, 0, Staleness::Reject),
            Err(SimError::Stale { sampled_at: 2, policy_step: 3, .. })
        ));
        assert!(grpo_gradient_estimate(&policy, &u, &batch, 0, Staleness::Accept).is_ok());
    }

    #[test]
    fn analytic_gradient_examples() {
        let policy = PolicyState::zeros(2);
        let half = PromptSpec { id: 0, difficulty: 0.0, features: vec![1.0, 0.0], base_length: 1 };
        assert_eq!(analytic_gradient(&policy, &half), vec![0.25, 0.0]);
        for d in [40.0, -40.0] {
            let p = PromptSpec { difficulty: d, ..half.clone() };
            let g = analytic_gradient(&policy, &p);
            assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12);
        }
        // p = 0.25 -> p(1-p) = 0.1875
        let quarter = PromptSpec { difficulty: 3f64.ln(), features: vec![1.0, 2.0], ..half };
        let g = analytic_gradient(&policy, &quarter);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 0.1875 * 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn update_examples() {
        let policy = PolicyState::zeros(2);
        let zero = GradientEstimate { gradient: vec![0.0, 0.0], contributing_rollouts: 0, batch_id: 0 };
        let next = policy_update(&policy, &zero, 0.1).unwrap();
        assert_eq!(next.theta, policy.theta);
        assert_eq!(next.step, 1);
        let g = GradientEstimate { gradient: vec![1.0, 0.0], contributing_rollouts: 0, batch_id: 0 };
        let next = policy_update(&policy, &g, 0.1).unwrap();
        assert_eq!(next.theta, vec![0.1, 0.0]);
        assert_eq!(policy.step, 0);
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let policy = PolicyState::zeros(2);
        let nan = GradientEstimate { gradient: vec![f64::NAN, 0.0], contributing_rollouts: 0, batch_id: 7 };
        assert!(matches!(policy_update(&policy, &nan, 0.1), Err(SimError::NonFinite(_))));
        let ok = GradientEstimate { gradient: vec![0.0, 0.0], contributing_rollouts: 0, batch_id: 0 };
        assert!(matches!(policy_update(&policy, &ok, 0.0), Err(SimError::Config(_))));
        assert!(AdamState::new(2).update(&policy, &nan, 0.1).is_err());
    }

    #[test]
    fn repeated_updates_raise_success() {
        let u = universe(1.0, vec![1.0, 0.5]);
        let mut policy = PolicyState::zeros(2);
        let mut last = policy.success_prob(u.prompt(0));
        for _ in 0..50 {
            let g = GradientEstimate {
                gradient: analytic_gradient(&policy, u.prompt(0)),
                contributing_rollouts: 0,
                batch_id: 0,
            };
            assert!(g.gradient[0] > 0.0);
            policy = policy_update(&policy, &g, 0.5).unwrap();
            let p = policy.success_prob(u.prompt(0));
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn adam_moves_uphill() {
        let policy = PolicyState::zeros(2);
        let g = GradientEstimate { gradient: vec![0.5, -0.2], contributing_rollouts: 0, batch_id: 0 };
        let next = AdamState::new(2).update(&policy, &g, 0.01).unwrap();
        assert!(next.theta[0] > 0.0 && next.theta[1] < 0.0);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn effective_ratio_examples() {
        assert_eq!(effective_ratio(&[group(0, &[1, 1], 0), group(1, &[0, 0], 0)]), 0.0);
        assert_eq!(effective_ratio(&[group(0, &[1, 0], 0), group(1, &[0, 1, 1], 0)]), 1.0);
        assert_eq!(effective_ratio(&[group(0, &[1, 0], 0), group(1, &[1, 1], 0)]), 0.5);
    }

    #[test]
    fn expected_sq_advantage_examples() {
        assert_eq!(expected_sq_advantage(0.5), 0.25);
        assert_eq!(expected_sq_advantage(0.0), 0.0);
        assert_eq!(expected_sq_advantage(1.0), 0.0);
    }
}
