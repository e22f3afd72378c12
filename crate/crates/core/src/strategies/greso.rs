use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SelectionContext, SelectionResult, StrategyKind, MAX_SAMPLING_ROUNDS};
use crate::env::{PromptUniverse, Purpose, Streams};
use crate::error::{Result, SimError};

/// Simplified GRESO: walk the dataset in epoch order and skip prompts whose
/// most recent earlier-epoch group was unanimous, with adaptive skip
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GresoState {
    pub epoch: u64,
    order: Vec<u64>,
    cursor: usize,
    /// Per prompt: `(epoch, mean reward)` of every group generated for it.
    pub history: BTreeMap<u64, Vec<(u64, f64)>>,
    pub p_easy: f64,
    pub p_hard: f64,
    epoch_groups: usize,
    epoch_easy: usize,
    epoch_hard: usize,
    /// Skips per epoch, indexed by epoch.
    pub skips_per_epoch: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GresoParams {
    alpha_easy: f64,
    alpha_hard: f64,
    delta_p: f64,
    replay_batch: usize,
    target_easy: f64,
    target_hard: f64,
}

impl GresoParams {
    fn from_kind(kind: &StrategyKind) -> Result<(Self, f64, f64)> {
        match *kind {
            StrategyKind::Greso { p_easy, p_hard, alpha_easy, alpha_hard, delta_p, replay_batch, target_easy, target_hard } => Ok((
                Self { alpha_easy, alpha_hard, delta_p, replay_batch, target_easy, target_hard },
                p_easy,
                p_hard,
            )),
            _ => Err(SimError::Config("GRESO state needs a GRESO strategy config".into())),
        }
    }
}

fn epoch_order(universe: &PromptUniverse, streams: &Streams, epoch: u64) -> Vec<u64> {
    let mut ids: Vec<u64> = universe.prompts().iter().map(|p| p.id).collect();
    ids.shuffle(&mut streams.substream(Purpose::Epoch, &[epoch]));
    ids
}

impl GresoState {
    pub fn new(universe: &PromptUniverse, kind: &StrategyKind, streams: &Streams) -> Result<Self> {
        let (_, p_easy, p_hard) = GresoParams::from_kind(kind)?;
        Ok(Self {
            epoch: 0,
            order: epoch_order(universe, streams, 0),
            cursor: 0,
            history: BTreeMap::new(),
            p_easy,
            p_hard,
            epoch_groups: 0,
            epoch_easy: 0,
            epoch_hard: 0,
            skips_per_epoch: vec![0],
        })
    }

    /// Skip probability for `prompt_id` in the current epoch.
    pub fn skip_probability(&self, prompt_id: u64, delta_p: f64) -> f64 {
        let last = self
            .history
            .get(&prompt_id)
            .and_then(|h| h.iter().rev().find(|(e, _)| *e < self.epoch));
        let cap = 1.0 - delta_p;
        match last {
            Some(&(_, 1.0)) => self.p_easy.min(cap),
            Some(&(_, 0.0)) => self.p_hard.min(cap),
            _ => 0.0,
        }
    }

    fn end_epoch(&mut self, params: &GresoParams, universe: &PromptUniverse, streams: &Streams) {
        if self.epoch_groups > 0 {
            let cap = 1.0 - params.delta_p;
            let easy = self.epoch_easy as f64 / self.epoch_groups as f64;
            let hard = self.epoch_hard as f64 / self.epoch_groups as f64;
            let step = |p: f64, observed: f64, target: f64, alpha: f64| {
                let moved = if observed > target { p + alpha } else { p - alpha };
                moved.clamp(0.0, cap)
            };
            self.p_easy = step(self.p_easy, easy, params.target_easy, params.alpha_easy);
            self.p_hard = step(self.p_hard, hard, params.target_hard, params.alpha_hard);
        }
        self.epoch += 1;
        self.order = epoch_order(universe, streams, self.epoch);
        self.cursor = 0;
        self.epoch_groups = 0;
        self.epoch_easy = 0;
        self.epoch_hard = 0;
        self.skips_per_epoch.push(0);
    }
}

/// Draw prompts in epoch order, skipping by history, until `m` groups of `n`
/// rollouts are generated. Skipped prompts cost nothing.
pub fn select_greso(
    ctx: &SelectionContext<'_>,
    m: usize,
    n: usize,
    kind: &StrategyKind,
    mut state: GresoState,
) -> Result<(SelectionResult, GresoState)> {
    let (params, _, _) = GresoParams::from_kind(kind)?;
    let streams = &ctx.sampler.streams;
    let limit = MAX_SAMPLING_ROUNDS * params.replay_batch;
    let mut chosen: Vec<(u64, u64)> = Vec::with_capacity(m);
    let mut candidate_ids = Vec::new();
    let mut examined = 0;
    while chosen.len() < m {
        if examined == limit {
            return Err(SimError::Starvation { strategy: "greso", needed: m, rounds: MAX_SAMPLING_ROUNDS });
        }
        if state.cursor == state.order.len() {
            state.end_epoch(&params, ctx.universe, streams);
        }
        let id = state.order[state.cursor];
        state.cursor += 1;
        examined += 1;
        candidate_ids.push(id);
        let skip = state.skip_probability(id, params.delta_p);
        if skip > 0.0 && streams.substream(Purpose::Skip, &[state.epoch, id]).random::<f64>() < skip {
            *state.skips_per_epoch.last_mut().expect("epoch entry") += 1;
            continue;
        }
        chosen.push((id, state.epoch));
    }

    // a prompt can recur within one step only across an epoch boundary
    let mut seen: BTreeMap<u64, u64> = BTreeMap::new();
    let jobs: Vec<(u64, u64)> = chosen
        .iter()
        .map(|&(id, _)| {
            let round = seen.entry(id).or_insert(0);
            let r = *round;
            *round += 1;
            (id, r)
        })
        .collect();
    let batch: Vec<_> = {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(id, round)| ctx.sampler.group(ctx.policy, ctx.universe.prompt(id), n, round))
            .collect()
    };
    for (g, &(id, epoch)) in batch.iter().zip(&chosen) {
        state.history.entry(id).or_default().push((epoch, g.mean_reward()));
        if epoch == state.epoch {
            state.epoch_groups += 1;
            state.epoch_easy += (g.successes() == g.n()) as usize;
            state.epoch_hard += (g.successes() == 0) as usize;
        }
    }
    let unanimous = batch.iter().filter(|g| g.is_unanimous()).count();
    let result = SelectionResult {
        generation_time_s: ctx.time_of(&batch),
        selected_prompt_ids: chosen.iter().map(|&(id, _)| id).collect(),
        batch,
        generated_rollouts_total: m * n,
        wasted_rollouts: 0,
        filter_scores: None,
        candidate_ids,
        fresh_rollouts: m * n,
        rounds: examined.div_ceil(params.replay_batch),
        unanimous_screens: unanimous,
    };
    Ok((result, state))
}
