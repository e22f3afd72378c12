use super::{SelectionContext, SelectionResult, MAX_SAMPLING_ROUNDS};
use crate::env::RolloutGroup;
use crate::error::{Result, SimError};

/// Dynamic sampling: draw `k m` prompts with `n` rollouts each, keep the
/// groups with mixed rewards, and repeat until `m` are buffered. The first
/// `m` buffered groups are trained on; the rest of the buffer is dropped.
pub fn select_ds(ctx: &SelectionContext<'_>, m: usize, n: usize, k: usize) -> Result<SelectionResult> {
    let pool = k * m;
    let mut buffer: Vec<RolloutGroup> = Vec::with_capacity(m);
    let mut candidate_ids = Vec::new();
    let mut generation_time_s = 0.0;
    let mut fresh = 0;
    let mut unanimous = 0;
    let mut rounds = 0;
    while buffer.len() < m {
        if rounds == MAX_SAMPLING_ROUNDS {
            return Err(SimError::Starvation { strategy: "ds", needed: m, rounds });
        }
        let prompts = ctx.candidates(pool, rounds as u64)?;
        candidate_ids.extend(prompts.iter().map(|p| p.id));
        let groups = ctx.generate(&prompts, n, rounds as u64);
        generation_time_s += ctx.time_of(&groups);
        fresh += pool * n;
        rounds += 1;
        for g in groups {
            if g.is_unanimous() {
                unanimous += 1;
            } else {
                buffer.push(g);
            }
        }
    }
    buffer.truncate(m);
    Ok(SelectionResult {
        selected_prompt_ids: buffer.iter().map(|g| g.prompt_id).collect(),
        batch: buffer,
        generated_rollouts_total: fresh,
        wasted_rollouts: fresh - m * n,
        filter_scores: None,
        candidate_ids,
        fresh_rollouts: fresh,
        generation_time_s,
        rounds,
        unanimous_screens: unanimous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{DifficultyDistribution, UniverseConfig};
    use crate::objective::effective_ratio;
    use crate::strategies::testing::{assert_shape, Fixture};

    fn constant(d: f64) -> UniverseConfig {
        UniverseConfig {
            num_prompts: 400,
            difficulty: DifficultyDistribution::Constant { value: d },
            feature_noise: 0.0,
            ..UniverseConfig::default()
        }
    }

    #[test]
    fn coin_flip_universe_fills_in_one_round() {
        // unanimity probability per group is 2 * 0.5^16, so one round is enough
        let f = Fixture::new(constant(0.0), 1);
        let r = select_ds(&f.ctx(), 16, 16, 4).unwrap();
        assert_shape(&r, 16, 16);
        assert_eq!(r.rounds, 1);
        assert_eq!(r.wasted_rollouts, 3 * 16 * 16);
        assert_eq!(effective_ratio(&r.batch), 1.0);
        assert!(r.batch.iter().all(|g| g.mean_reward() > 0.0 && g.mean_reward() < 1.0));
    }

    #[test]
    fn solved_universe_starves() {
        let f = Fixture::new(constant(-1e9), 1);
        let err = select_ds(&f.ctx(), 8, 8, 2).unwrap_err();
        assert!(matches!(err, SimError::Starvation { strategy: "ds", .. }));
    }

    #[test]
    fn unanimous_screens_mean_positive_waste() {
        let f = Fixture::default_universe(5);
        let r = select_ds(&f.ctx(), 32, 8, 1).unwrap();
        assert_shape(&r, 32, 8);
        assert!(r.unanimous_screens > 0);
        assert!(r.wasted_rollouts > 0);
        assert!(r.rounds >= 2);
        assert_eq!(effective_ratio(&r.batch), 1.0);
    }
}
