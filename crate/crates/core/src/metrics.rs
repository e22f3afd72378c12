//! Per-step observables and the run's CSV schema.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{PolicyState, PromptSpec, PromptUniverse, Purpose, RolloutSampler};
use crate::error::Result;
use crate::objective::{effective_ratio, GradientEstimate};
use crate::strategies::SelectionResult;
use crate::value::{empirical_estimator_ev, value_ev, ValueModelState};

/// How the reference-policy difficulty of selected prompts is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DifficultyMode {
    /// Exact success probability under the reference policy.
    #[default]
    Analytic,
    /// Mean of `probes` fresh reference-policy rollouts per prompt.
    Sampled { probes: usize },
}

/// Mean reference-policy success over `prompts`. `round` keys the probe
/// substreams in sampled mode.
pub fn pi_ref_difficulty(
    prompts: &[&PromptSpec],
    pi_ref: &PolicyState,
    mode: DifficultyMode,
    sampler: &RolloutSampler,
    round: u64,
) -> f64 {
    if prompts.is_empty() {
        return f64::NAN;
    }
    let total: f64 = match mode {
        DifficultyMode::Analytic => prompts.iter().map(|p| pi_ref.success_prob(p)).sum(),
        DifficultyMode::Sampled { probes } => prompts
            .iter()
            .map(|p| {
                let rs = sampler.rollouts(pi_ref, p, 0..probes, Purpose::ReferenceProbe, round);
                rs.iter().map(|r| r.reward as f64).sum::<f64>() / probes as f64
            })
            .sum(),
    };
    total / prompts.len() as f64
}

/// One row of a run trace. The first eleven fields are the fixed schema; the
/// rest are extra diagnostics appended after them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub cumulative_sim_time_s: f64,
    /// Mean analytic success over the candidate pool, before any filtering.
    pub train_reward_pre_filter: f64,
    /// Mean sampled reward over the trained batch.
    pub train_reward_post_filter: f64,
    pub effective_ratio: f64,
    pub grad_norm: f64,
    pub value_ev: Option<f64>,
    pub empirical_ev_by_j: Option<BTreeMap<usize, f64>>,
    pub wasted_rollouts: usize,
    pub mean_staleness: f64,
    pub pi_ref_difficulty_of_selected: f64,

    /// Mean analytic success over the trained batch.
    pub train_reward_post_filter_analytic: f64,
    pub step_generation_time_s: f64,
    pub generated_rollouts: usize,
    /// Mean analytic success over the full universe before the update.
    pub mean_success_analytic: f64,
    pub policy_step: u64,
    pub value_trained_through_step: Option<i64>,
    /// Mean `|p_now - p_sampled|` over trained rollouts.
    pub mean_prob_drift: f64,
    pub sampling_rounds: usize,
}

pub const CSV_COLUMNS: [&str; 19] = [
    "step",
    "cumulative_sim_time_s",
    "train_reward_pre_filter",
    "train_reward_post_filter",
    "effective_ratio",
    "grad_norm",
    "value_ev",
    "empirical_ev_by_j",
    "wasted_rollouts",
    "mean_staleness",
    "pi_ref_difficulty_of_selected",
    "train_reward_post_filter_analytic",
    "step_generation_time_s",
    "generated_rollouts",
    "mean_success_analytic",
    "policy_step",
    "value_trained_through_step",
    "mean_prob_drift",
    "sampling_rounds",
];

/// What to measure beyond the always-on fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordOptions {
    pub difficulty: DifficultyMode,
    /// Record the value model's EV whenever a value model exists.
    pub value_ev: bool,
    /// Sample sizes for the empirical-estimator EV; empty disables it.
    pub empirical_ev_js: Vec<usize>,
    /// Compute the empirical EV every this many steps.
    pub empirical_ev_every: u64,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self { difficulty: DifficultyMode::Analytic, value_ev: true, empirical_ev_js: Vec::new(), empirical_ev_every: 1 }
    }
}

/// Everything a completed step exposes to the recorder.
#[derive(Debug, Clone, Copy)]
pub struct StepObservation<'a> {
    pub step: u64,
    pub cumulative_sim_time_s: f64,
    /// Full universe, for universe-wide diagnostics.
    pub universe: &'a PromptUniverse,
    /// Policy that generated the batch, before its update.
    pub policy: &'a PolicyState,
    pub pi_ref: &'a PolicyState,
    pub selection: &'a SelectionResult,
    pub gradient: &'a GradientEstimate,
    /// Value model used for this step's selection.
    pub value: Option<&'a ValueModelState>,
    pub sampler: &'a RolloutSampler,
    pub options: &'a RecordOptions,
}

pub fn record_step(obs: &StepObservation<'_>) -> Result<MetricsRecord> {
    let sel = obs.selection;
    let universe = obs.universe;
    let mean_p = |ids: &mut dyn Iterator<Item = &u64>| {
        let (s, c) = ids.fold((0.0, 0usize), |(s, c), id| (s + obs.policy.success_prob(universe.prompt(*id)), c + 1));
        if c == 0 { f64::NAN } else { s / c as f64 }
    };
    let post = sel.batch.iter().map(|g| g.mean_reward()).sum::<f64>() / sel.batch.len() as f64;
    let selected: Vec<&PromptSpec> = sel.selected_prompt_ids.iter().map(|&id| universe.prompt(id)).collect();
    let (drift_sum, drift_n) = sel
        .batch
        .iter()
        .flat_map(|g| {
            let p = obs.policy.success_prob(universe.prompt(g.prompt_id));
            g.rollouts().iter().map(move |r| (p - r.sampling_prob).abs())
        })
        .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));

    let value_ev = match obs.value {
        Some(v) if obs.options.value_ev => value_ev(v, universe, obs.policy).ok(),
        _ => None,
    };
    let every = obs.options.empirical_ev_every.max(1);
    let empirical_ev_by_j = if !obs.options.empirical_ev_js.is_empty() && obs.step.is_multiple_of(every) {
        let mut map = BTreeMap::new();
        for &j in &obs.options.empirical_ev_js {
            if let Ok(ev) = empirical_estimator_ev(universe, obs.policy, j, &obs.sampler.streams, 0) {
                map.insert(j, ev);
            }
        }
        Some(map)
    } else {
        None
    };

    Ok(MetricsRecord {
        step: obs.step,
        cumulative_sim_time_s: obs.cumulative_sim_time_s,
        train_reward_pre_filter: mean_p(&mut sel.candidate_ids.iter()),
        train_reward_post_filter: post,
        effective_ratio: effective_ratio(&sel.batch),
        grad_norm: obs.gradient.norm(),
        value_ev,
        empirical_ev_by_j,
        wasted_rollouts: sel.wasted_rollouts,
        mean_staleness: sel.mean_staleness(obs.policy.step),
        pi_ref_difficulty_of_selected: pi_ref_difficulty(
            &selected,
            obs.pi_ref,
            obs.options.difficulty,
            obs.sampler,
            obs.step,
        ),
        train_reward_post_filter_analytic: mean_p(&mut sel.selected_prompt_ids.iter()),
        step_generation_time_s: sel.generation_time_s,
        generated_rollouts: sel.generated_rollouts_total,
        mean_success_analytic: mean_p(&mut universe.prompts().iter().map(|p| &p.id)),
        policy_step: obs.policy.step,
        value_trained_through_step: obs.value.map(|v| v.trained_through_step),
        mean_prob_drift: if drift_n == 0 { 0.0 } else { drift_sum / drift_n as f64 },
        sampling_rounds: sel.rounds,
    })
}

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed.
pub fn format_g9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn ev_map_cell(map: &BTreeMap<usize, f64>) -> String {
    map.iter().map(|(j, ev)| format!("{j}:{}", format_g9(*ev))).collect::<Vec<_>>().join(";")
}

impl MetricsRecord {
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_g9).unwrap_or_default();
        vec![
            self.step.to_string(),
            format_g9(self.cumulative_sim_time_s),
            format_g9(self.train_reward_pre_filter),
            format_g9(self.train_reward_post_filter),
            format_g9(self.effective_ratio),
            format_g9(self.grad_norm),
            opt(self.value_ev),
            self.empirical_ev_by_j.as_ref().map(ev_map_cell).unwrap_or_default(),
            self.wasted_rollouts.to_string(),
            format_g9(self.mean_staleness),
            format_g9(self.pi_ref_difficulty_of_selected),
            format_g9(self.train_reward_post_filter_analytic),
            format_g9(self.step_generation_time_s),
            self.generated_rollouts.to_string(),
            format_g9(self.mean_success_analytic),
            self.policy_step.to_string(),
            self.value_trained_through_step.map(|s| s.to_string()).unwrap_or_default(),
            format_g9(self.mean_prob_drift),
            self.sampling_rounds.to_string(),
        ]
    }
}

pub fn write_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}
