use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{select_ds, SelectionContext, SelectionResult, MAX_SAMPLING_ROUNDS};
use crate::env::{Purpose, Rollout, RolloutGroup};
use crate::error::{Result, SimError};

/// State SPEED carries between steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeedState {
    /// Prompts whose `n_init` screening rollouts were mixed, awaiting completion.
    pub accepted: Vec<RolloutGroup>,
    /// Completed groups not yet trained on, oldest first.
    pub buffer: VecDeque<RolloutGroup>,
}

/// SPEED: screen `k m` fresh prompts with `n_init` rollouts; complete the
/// prompts accepted in the previous round with `n - n_init` rollouts from the
/// current policy; loop until `m` complete groups are buffered.
///
/// Accepted prompts carried across a step boundary keep their old screening
/// rollouts, so trained groups mix rollouts from different policy steps.
/// Rollouts are attributed to the step whose batch trains on them: the
/// result's `generated_rollouts_total` is `m n` plus the screening rollouts
/// discarded during this call, while `fresh_rollouts` counts what this call
/// actually generated.
///
/// With `n_init == n` there is nothing to complete and this is exactly
/// [`select_ds`].
pub fn select_speed(
    ctx: &SelectionContext<'_>,
    m: usize,
    n: usize,
    k: usize,
    n_init: usize,
    state: SpeedState,
) -> Result<(SelectionResult, SpeedState)> {
    if n_init == n {
        return Ok((select_ds(ctx, m, n, k)?, state));
    }
    if n_init == 0 || n_init > n {
        return Err(SimError::Config(format!("need 1 <= n_init <= n, got n_init={n_init}, n={n}")));
    }
    let SpeedState { mut accepted, mut buffer } = state;
    let pool = k * m;
    let mut candidate_ids = Vec::new();
    let mut generation_time_s = 0.0;
    let mut fresh = 0;
    let mut discarded = 0;
    let mut unanimous = 0;
    let mut rounds = 0;
    while buffer.len() < m {
        if rounds == MAX_SAMPLING_ROUNDS {
            return Err(SimError::Starvation { strategy: "speed", needed: m, rounds });
        }
        let round = rounds as u64;
        let prompts = ctx.candidates(pool, round)?;
        candidate_ids.extend(prompts.iter().map(|p| p.id));
        let screens = ctx.generate_with(&prompts, n_init, Purpose::Rollout, round);
        let completions: Vec<Vec<Rollout>> = accepted
            .iter()
            .map(|g| {
                let prompt = ctx.universe.prompt(g.prompt_id);
                ctx.sampler.rollouts(ctx.policy, prompt, n_init..n, Purpose::Rollout, round)
            })
            .collect();
        generation_time_s += ctx.cost.generation_time(
            screens
                .iter()
                .flat_map(|g| g.lengths())
                .chain(completions.iter().flatten().map(|r| r.length)),
        );
        fresh += screens.len() * n_init + completions.len() * (n - n_init);
        let completed: Vec<RolloutGroup> =
            accepted.iter().zip(completions).map(|(g, more)| g.extended(more)).collect();
        buffer.extend(completed);
        accepted = Vec::with_capacity(screens.len());
        for g in screens {
            if g.is_unanimous() {
                unanimous += 1;
                discarded += n_init;
            } else {
                accepted.push(g);
            }
        }
        rounds += 1;
    }
    let batch: Vec<RolloutGroup> = buffer.drain(..m).collect();
    let result = SelectionResult {
        selected_prompt_ids: batch.iter().map(|g| g.prompt_id).collect(),
        batch,
        generated_rollouts_total: m * n + discarded,
        wasted_rollouts: discarded,
        filter_scores: None,
        candidate_ids,
        fresh_rollouts: fresh,
        generation_time_s,
        rounds,
        unanimous_screens: unanimous,
    };
    Ok((result, SpeedState { accepted, buffer }))
}
