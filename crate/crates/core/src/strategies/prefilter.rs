use crate::env::{PolicyState, PromptUniverse, Purpose, RolloutSampler};
use crate::error::{Result, SimError};

/// One-time difficulty filter under a fixed reference policy: keeps prompts
/// whose `n_pre`-sample accuracy lies strictly between `p_low` and `p_high`.
/// The result never changes afterwards, even once the policy has moved on.
pub fn prefilter_universe(
    universe: &PromptUniverse,
    pi_ref: &PolicyState,
    n_pre: usize,
    p_low: f64,
    p_high: f64,
    sampler: &RolloutSampler,
) -> Result<PromptUniverse> {
    if n_pre == 0 {
        return Err(SimError::Config("n_pre must be at least 1".into()));
    }
    universe
        .retain(|prompt| {
            let rollouts = sampler.rollouts(pi_ref, prompt, 0..n_pre, Purpose::PreFilter, 0);
            let acc = rollouts.iter().filter(|r| r.reward == 1).count() as f64 / n_pre as f64;
            p_low < acc && acc < p_high
        })
        .ok_or(SimError::EmptyFilter { p_low, p_high })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{LengthModel, MixtureComponent, PromptSpec, Streams, UniverseConfig, DifficultyDistribution, make_universe};

    fn sampler() -> RolloutSampler {
        RolloutSampler::new(Streams::new(1), LengthModel::default(), 4096)
    }

    fn universe(difficulties: &[f64]) -> PromptUniverse {
        let prompts = difficulties
            .iter()
            .enumerate()
            .map(|(i, &d)| PromptSpec { id: i as u64, difficulty: d, features: vec![1.0, d], base_length: 10 })
            .collect();
        let cfg = UniverseConfig { num_prompts: difficulties.len(), feature_dim: 2, ..UniverseConfig::default() };
        PromptUniverse::from_prompts(prompts, cfg).unwrap()
    }

    #[test]
    fn boundaries_are_strict() {
        // prompt 0 always solved, prompt 1 coin flip, prompt 2 never solved
        let u = universe(&[-1e9, 0.0, 1e9]);
        let kept = prefilter_universe(&u, &PolicyState::zeros(2), 16, 0.0, 1.0, &sampler()).unwrap();
        let ids: Vec<u64> = kept.prompts().iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![1]);
    }

    #[test]
    fn degenerate_universe_errors() {
        let u = universe(&[-1e9, 1e9, 1e9, -1e9]);
        let err = prefilter_universe(&u, &PolicyState::zeros(2), 8, 0.0, 1.0, &sampler()).unwrap_err();
        assert!(matches!(err, SimError::EmptyFilter { .. }));
    }

    #[test]
    fn filtered_set_is_fixed_under_later_policies() {
        let cfg = UniverseConfig {
            num_prompts: 300,
            difficulty: DifficultyDistribution::Mixture {
                components: vec![
                    MixtureComponent { weight: 1.0, mean: 0.0, std: 1.0 },
                    MixtureComponent { weight: 1.0, mean: 8.0, std: 0.5 },
                ],
            },
            ..UniverseConfig::default()
        };
        let u = make_universe(&cfg, 4).unwrap();
        let pi_ref = PolicyState::zeros(8);
        let kept = prefilter_universe(&u, &pi_ref, 16, 0.0, 1.0, &sampler()).unwrap();
        // the hard mode is (almost) never kept
        assert!(kept.prompts().iter().filter(|p| p.difficulty > 5.0).count() < 5);
        let again = prefilter_universe(&u, &pi_ref, 16, 0.0, 1.0, &sampler()).unwrap();
        assert_eq!(kept, again);
    }
}
