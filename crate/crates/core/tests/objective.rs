use proptest::prelude::*;

use pcl_sim::env::{make_universe, LengthModel, PolicyState, PromptUniverse, Rollout, RolloutGroup, RolloutSampler, Streams, UniverseConfig};
use pcl_sim::objective::{
    advantages, analytic_gradient, effective_ratio, enumerated_expected_gradient, grpo_gradient_estimate,
    policy_update, AdamState, Staleness,
};
use pcl_sim::selfcheck::prompt_with_prob;
use pcl_sim::SimError;

fn group(id: u64, rewards: &[u8], step: u64) -> RolloutGroup {
    RolloutGroup::new(
        id,
        rewards.iter().map(|&r| Rollout { reward: r, length: 10, sampled_at_step: step, sampling_prob: 0.5 }).collect(),
    )
}

fn small_universe() -> PromptUniverse {
    make_universe(&UniverseConfig { num_prompts: 20, ..UniverseConfig::default() }, 0).unwrap()
}

proptest! {
    #[test]
    fn enumeration_matches_closed_form(p in 0.01f64..0.99, n in 1usize..10, x in -3.0f64..3.0) {
        let phi = vec![1.0, x];
        let got = enumerated_expected_gradient(&PolicyState::zeros(2), &prompt_with_prob(p, phi.clone()), n);
        let scale = (n as f64 - 1.0) / n as f64 * p * (1.0 - p);
        for (g, f) in got.iter().zip(&phi) {
            prop_assert!((g - scale * f).abs() <= 1e-12);
        }
    }

    #[test]
    fn advantages_sum_to_zero(rewards in prop::collection::vec(0u8..2, 2..32)) {
        let g = group(0, &rewards, 0);
        let s: f64 = advantages(&g).iter().sum();
        prop_assert!(s.abs() < 1e-12);
        prop_assert_eq!(advantages(&g), g.advantages().to_vec());
    }

    #[test]
    fn unanimous_groups_contribute_nothing(n in 2usize..32, correct in any::<bool>(), step in 0u64..5) {
        let u = small_universe();
        let policy = PolicyState { theta: vec![0.3; u.feature_dim()], step };
        let batch = vec![group(3, &vec![correct as u8; n], step)];
        let g = grpo_gradient_estimate(&policy, &u, &batch, 0, Staleness::Reject).unwrap();
        prop_assert!(g.gradient.iter().all(|&x| x == 0.0));
        prop_assert_eq!(g.contributing_rollouts, 0);
        prop_assert_eq!(effective_ratio(&batch), 0.0);
    }
}

#[test]
fn analytic_gradient_is_the_expectation_limit() {
    let prompt = prompt_with_prob(0.3, vec![1.0, 2.0]);
    let policy = PolicyState::zeros(2);
    let exact = analytic_gradient(&policy, &prompt);
    let big_n = enumerated_expected_gradient(&policy, &prompt, 20);
    // 2^20 weighted terms accumulate rounding well above one ulp
    for (a, b) in exact.iter().zip(&big_n) {
        assert!((a * 19.0 / 20.0 - b).abs() < 1e-10, "{a} {b}");
    }
}

#[test]
fn stale_rollouts_are_rejected_unless_accepted() {
    let u = small_universe();
    let policy = PolicyState { theta: vec![0.0; u.feature_dim()], step: 4 };
    let batch = vec![group(1, &[1, 0, 1, 0], 3)];
    let err = grpo_gradient_estimate(&policy, &u, &batch, 0, Staleness::Reject).unwrap_err();
    assert!(matches!(err, SimError::Stale { sampled_at: 3, policy_step: 4, .. }));
    assert!(grpo_gradient_estimate(&policy, &u, &batch, 0, Staleness::Accept).is_ok());
}

#[test]
fn gradient_scale_is_per_rollout() {
    let u = small_universe();
    let policy = PolicyState::zeros(u.feature_dim());
    let one = vec![group(2, &[1, 0], 0)];
    let two = vec![group(2, &[1, 0], 0), group(2, &[0, 1], 0)];
    let a = grpo_gradient_estimate(&policy, &u, &one, 0, Staleness::Reject).unwrap();
    let b = grpo_gradient_estimate(&policy, &u, &two, 1, Staleness::Reject).unwrap();
    for (x, y) in a.gradient.iter().zip(&b.gradient) {
        assert!((x - y).abs() < 1e-15);
    }
    assert_eq!(b.contributing_rollouts, 4);
}

#[test]
fn updates_advance_step_and_reject_bad_input() {
    let u = small_universe();
    let policy = PolicyState::zeros(u.feature_dim());
    let sampler = RolloutSampler::new(Streams::new(1), LengthModel::default(), 4096);
    let batch: Vec<_> = u.prompts().iter().map(|p| sampler.group(&policy, p, 8, 0)).collect();
    let g = grpo_gradient_estimate(&policy, &u, &batch, 0, Staleness::Reject).unwrap();
    let next = policy_update(&policy, &g, 0.1).unwrap();
    assert_eq!(next.step, 1);
    let mut adam = AdamState::new(u.feature_dim());
    assert_eq!(adam.update(&policy, &g, 0.1).unwrap().step, 1);
    assert!(policy_update(&policy, &g, 0.0).is_err());
    let mut nan = g.clone();
    nan.gradient[0] = f64::NAN;
    assert!(matches!(policy_update(&policy, &nan, 0.1), Err(SimError::NonFinite(_))));
}
