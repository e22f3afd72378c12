use super::{greedy_downsample, SelectionContext, SelectionResult};
use crate::env::Purpose;
use crate::error::Result;

/// Estimate each candidate's success rate from `probes` extra rollouts and
/// train on the `m` estimates closest to `target`. The probe rollouts are
/// paid for and then discarded.
pub fn oracle_difficulty_select(
    ctx: &SelectionContext<'_>,
    m: usize,
    n: usize,
    oversample: usize,
    probes: usize,
    target: f64,
) -> Result<SelectionResult> {
    let candidates = ctx.candidates(oversample * m, 0)?;
    let probe_groups = ctx.generate_with(&candidates, probes, Purpose::Probe, 0);
    let scores: Vec<f64> = probe_groups.iter().map(|g| g.mean_reward()).collect();
    let picked = greedy_downsample(&scores, target, m)?;
    let prompts: Vec<_> = picked.iter().map(|&i| candidates[i]).collect();
    let batch = ctx.generate(&prompts, n, 0);
    let wasted = oversample * m * probes;
    Ok(SelectionResult {
        generation_time_s: ctx.time_of(&probe_groups) + ctx.time_of(&batch),
        selected_prompt_ids: prompts.iter().map(|p| p.id).collect(),
        batch,
        generated_rollouts_total: m * n + wasted,
        wasted_rollouts: wasted,
        filter_scores: Some(scores),
        candidate_ids: candidates.iter().map(|p| p.id).collect(),
        fresh_rollouts: m * n + wasted,
        rounds: 1,
        unanimous_screens: probe_groups.iter().filter(|g| g.is_unanimous()).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::testing::{assert_shape, Fixture};

    #[test]
    fn probes_are_charged_as_waste() {
        let f = Fixture::default_universe(9);
        let r = oracle_difficulty_select(&f.ctx(), 16, 8, 4, 4, 0.5).unwrap();
        assert_shape(&r, 16, 8);
        assert_eq!(r.wasted_rollouts, 4 * 16 * 4);
        let train_only = f.ctx().time_of(&r.batch);
        assert!(r.generation_time_s > train_only);
    }

    #[test]
    fn selected_probe_means_are_nearest_target() {
        let f = Fixture::default_universe(9);
        let r = oracle_difficulty_select(&f.ctx(), 16, 8, 4, 8, 0.5).unwrap();
        let scores = r.filter_scores.as_ref().unwrap();
        let mut dists: Vec<f64> = scores.iter().map(|s| (s - 0.5).abs()).collect();
        dists.sort_by(f64::total_cmp);
        let kept: Vec<f64> = r
            .selected_prompt_ids
            .iter()
            .map(|id| {
                let i = r.candidate_ids.iter().position(|c| c == id).unwrap();
                (scores[i] - 0.5).abs()
            })
            .collect();
        assert!(kept.iter().all(|d| *d <= dists[15] + 1e-12));
    }
}
