use super::{SelectionContext, SelectionResult};
use crate::error::Result;

/// Plain GRPO: `m` prompts uniformly without replacement, `n` rollouts each.
pub fn select_uniform(ctx: &SelectionContext<'_>, m: usize, n: usize) -> Result<SelectionResult> {
    let prompts = ctx.candidates(m, 0)?;
    let batch = ctx.generate(&prompts, n, 0);
    let ids: Vec<u64> = prompts.iter().map(|p| p.id).collect();
    Ok(SelectionResult {
        generation_time_s: ctx.time_of(&batch),
        batch,
        generated_rollouts_total: m * n,
        wasted_rollouts: 0,
        selected_prompt_ids: ids.clone(),
        filter_scores: None,
        candidate_ids: ids,
        fresh_rollouts: m * n,
        rounds: 1,
        unanimous_screens: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{PolicyState, UniverseConfig};
    use crate::strategies::testing::{assert_shape, Fixture};

    #[test]
    fn whole_universe_selected_once() {
        let f = Fixture::new(UniverseConfig { num_prompts: 50, ..UniverseConfig::default() }, 3);
        let r = select_uniform(&f.ctx(), 50, 4).unwrap();
        assert_shape(&r, 50, 4);
        let mut ids = r.selected_prompt_ids.clone();
        ids.sort();
        assert_eq!(ids, (0..50).collect::<Vec<u64>>());
        assert_eq!(r.wasted_rollouts, 0);
    }

    #[test]
    fn too_many_prompts_is_config_error() {
        let f = Fixture::new(UniverseConfig { num_prompts: 10, ..UniverseConfig::default() }, 3);
        assert!(select_uniform(&f.ctx(), 11, 4).is_err());
    }

    #[test]
    fn selection_frequencies_are_uniform() {
        let n_prompts = 100u64;
        let mut f = Fixture::new(UniverseConfig { num_prompts: n_prompts as usize, ..UniverseConfig::default() }, 8);
        let (m, steps) = (10usize, 10_000u64);
        let mut counts = vec![0u64; n_prompts as usize];
        for step in 0..steps {
            f.policy = PolicyState { step, ..f.policy.clone() };
            let ctx = f.ctx();
            for p in ctx.candidates(m, 0).unwrap() {
                counts[p.id as usize] += 1;
            }
        }
        // each count ~ Binomial(steps, m/N)
        let q = m as f64 / n_prompts as f64;
        let mean = steps as f64 * q;
        let sd = (steps as f64 * q * (1.0 - q)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 4.0 * sd, "count {c} vs {mean} +- {sd}");
        }
    }
}
