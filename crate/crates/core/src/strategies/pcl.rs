use super::{greedy_downsample, SelectionContext, SelectionResult};
use crate::error::Result;
use crate::value::ValueModelState;

/// Prompt curriculum learning: score `k m` uniform candidates with the value
/// model and train on the `m` whose predicted success is closest to `tau`.
/// Scoring costs no generation, so nothing is wasted.
pub fn select_pcl(
    ctx: &SelectionContext<'_>,
    value: &ValueModelState,
    m: usize,
    n: usize,
    k: usize,
    tau: f64,
) -> Result<SelectionResult> {
    let candidates = ctx.candidates(k * m, 0)?;
    let scores: Vec<f64> = candidates.iter().map(|p| (value.predict(p) - tau).abs()).collect();
    let picked = greedy_downsample(&scores, 0.0, m)?;
    let prompts: Vec<_> = picked.iter().map(|&i| candidates[i]).collect();
    let batch = ctx.generate(&prompts, n, 0);
    Ok(SelectionResult {
        generation_time_s: ctx.time_of(&batch),
        selected_prompt_ids: prompts.iter().map(|p| p.id).collect(),
        batch,
        generated_rollouts_total: m * n,
        wasted_rollouts: 0,
        filter_scores: Some(scores),
        candidate_ids: candidates.iter().map(|p| p.id).collect(),
        fresh_rollouts: m * n,
        rounds: 1,
        unanimous_screens: 0,
    })
}
