use serde::{Deserialize, Serialize};

use super::config::{Optimizer, RunConfig};
use crate::env::{make_universe, PolicyState, PromptUniverse, Purpose, RolloutSampler, Streams};
use crate::error::{Result, SimError};
use crate::metrics::{record_step, MetricsRecord, StepObservation};
use crate::objective::{grpo_gradient_estimate, policy_update, AdamState, Staleness};
use crate::strategies::{
    oracle_difficulty_select, prefilter_universe, select_ds, select_greso, select_pcl, select_speed, select_uniform,
    GresoState, SelectionContext, SelectionResult, SpeedState, StrategyKind,
};
use crate::value::{value_update, ValueModelState};

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    /// The next step would have crossed the simulated-time budget.
    SimTime { next_step_time_s: f64 },
    Starvation { message: String },
}

/// One-time work done before the first step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    /// Prompts surviving the pre-filter.
    pub kept_prompts: usize,
    pub rollouts: usize,
    /// Simulated seconds of the filter pass. Not charged to the step budget.
    pub sim_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config: RunConfig,
    pub records: Vec<MetricsRecord>,
    pub initial_policy: PolicyState,
    pub final_policy: PolicyState,
    pub final_value: Option<ValueModelState>,
    pub total_generated_rollouts: usize,
    pub total_wasted_rollouts: usize,
    /// Mean analytic success over the universe under `final_policy`.
    pub final_mean_success: f64,
    pub termination: Termination,
    pub setup: Option<Setup>,
}

impl RunTrace {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn cumulative_sim_time_s(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_sim_time_s)
    }
}

#[derive(Debug, Clone)]
enum Carry {
    None,
    Speed(SpeedState),
    Greso(GresoState),
}

/// A run in progress. [`run`] drives one to completion.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: RunConfig,
    universe: PromptUniverse,
    /// Universe selection draws from; differs from `universe` after a pre-filter.
    pool: PromptUniverse,
    pi_ref: PolicyState,
    policy: PolicyState,
    value: Option<ValueModelState>,
    adam: Option<AdamState>,
    sampler: RolloutSampler,
    carry: Carry,
    cumulative_sim_time_s: f64,
    records: Vec<MetricsRecord>,
    total_generated: usize,
    total_wasted: usize,
    setup: Option<Setup>,
    termination: Option<Termination>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let streams = Streams::new(config.seed);
        let universe = make_universe(&config.universe, streams.seed())?;
        let dim = universe.feature_dim();
        let policy = PolicyState::zeros(dim);
        let sampler = RolloutSampler::new(streams, config.length, config.cost.context_limit);
        let mut setup = None;
        let pool = match config.strategy.kind {
            StrategyKind::PreFilter { n_pre, p_low, p_high } => {
                let pool = prefilter_universe(&universe, &policy, n_pre, p_low, p_high, &sampler)?;
                let lengths: Vec<u32> = universe
                    .prompts()
                    .iter()
                    .flat_map(|p| sampler.rollouts(&policy, p, 0..n_pre, Purpose::PreFilter, 0))
                    .map(|r| r.length)
                    .collect();
                setup = Some(Setup {
                    kept_prompts: pool.len(),
                    rollouts: lengths.len(),
                    sim_time_s: config.cost.generation_time(lengths),
                });
                pool
            }
            _ => universe.clone(),
        };
        let carry = match &config.strategy.kind {
            StrategyKind::Speed { .. } => Carry::Speed(SpeedState::default()),
            kind @ StrategyKind::Greso { .. } => Carry::Greso(GresoState::new(&pool, kind, &sampler.streams)?),
            _ => Carry::None,
        };
        let value = matches!(config.strategy.kind, StrategyKind::Pcl { .. }).then(|| ValueModelState::zeros(dim));
        let adam = (config.optimizer == Optimizer::Adam).then(|| AdamState::new(dim));
        Ok(Self {
            pi_ref: policy.clone(),
            policy,
            universe,
            pool,
            value,
            adam,
            sampler,
            carry,
            cumulative_sim_time_s: 0.0,
            records: Vec::new(),
            total_generated: 0,
            total_wasted: 0,
            setup,
            termination: None,
            config,
        })
    }

    pub fn policy(&self) -> &PolicyState {
        &self.policy
    }

    pub fn value(&self) -> Option<&ValueModelState> {
        self.value.as_ref()
    }

    pub fn universe(&self) -> &PromptUniverse {
        &self.universe
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn termination(&self) -> Option<&Termination> {
        self.termination.as_ref()
    }

    fn select(&mut self) -> Result<SelectionResult> {
        let ctx = SelectionContext {
            universe: &self.pool,
            policy: &self.policy,
            sampler: &self.sampler,
            cost: &self.config.cost,
        };
        let (m, n) = (self.config.strategy.m, self.config.strategy.n);
        let kind = &self.config.strategy.kind;
        match *kind {
            StrategyKind::Uniform | StrategyKind::PreFilter { .. } => select_uniform(&ctx, m, n),
            StrategyKind::Ds { k } => select_ds(&ctx, m, n, k),
            StrategyKind::Speed { k, n_init } => {
                let Carry::Speed(state) = std::mem::replace(&mut self.carry, Carry::None) else {
                    unreachable!("SPEED runs carry a SPEED buffer")
                };
                // keep the old buffer if selection fails so the state stays consistent
                match select_speed(&ctx, m, n, k, n_init, state.clone()) {
                    Ok((r, next)) => {
                        self.carry = Carry::Speed(next);
                        Ok(r)
                    }
                    Err(e) => {
                        self.carry = Carry::Speed(state);
                        Err(e)
                    }
                }
            }
            StrategyKind::Greso { .. } => {
                let Carry::Greso(state) = std::mem::replace(&mut self.carry, Carry::None) else {
                    unreachable!("GRESO runs carry a reward history")
                };
                match select_greso(&ctx, m, n, kind, state.clone()) {
                    Ok((r, next)) => {
                        self.carry = Carry::Greso(next);
                        Ok(r)
                    }
                    Err(e) => {
                        self.carry = Carry::Greso(state);
                        Err(e)
                    }
                }
            }
            StrategyKind::Pcl { k, tau } => {
                let value = self.value.as_ref().expect("PCL runs have a value model");
                select_pcl(&ctx, value, m, n, k, tau)
            }
            StrategyKind::OracleDifficulty { oversample, probes, target } => {
                oracle_difficulty_select(&ctx, m, n, oversample, probes, target)
            }
        }
    }

    fn budget_left(&self) -> bool {
        self.config.budget.max_steps.is_none_or(|s| (self.records.len() as u64) < s)
    }

    /// Run one step. Returns `None` once the run has terminated.
    pub fn step(&mut self) -> Result<Option<&MetricsRecord>> {
        if self.termination.is_some() {
            return Ok(None);
        }
        if !self.budget_left() {
            self.termination = Some(Termination::MaxSteps);
            return Ok(None);
        }
        let selection = match self.select() {
            Ok(s) => s,
            Err(e @ SimError::Starvation { .. }) => {
                self.termination = Some(Termination::Starvation { message: e.to_string() });
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let step_time = selection.generation_time_s + self.config.selection_overhead_s;
        if let Some(limit) = self.config.budget.max_sim_time_s {
            if self.cumulative_sim_time_s + step_time > limit {
                self.termination = Some(Termination::SimTime { next_step_time_s: step_time });
                return Ok(None);
            }
        }
        let staleness = match self.config.strategy.kind {
            StrategyKind::Speed { .. } => Staleness::Accept,
            _ => Staleness::Reject,
        };
        let step = self.policy.step;
        let gradient = grpo_gradient_estimate(&self.policy, &self.universe, &selection.batch, step, staleness)?;
        let lr = self.config.effective_policy_lr();
        let next_policy = match &mut self.adam {
            Some(adam) => adam.update(&self.policy, &gradient, lr)?,
            None => policy_update(&self.policy, &gradient, lr)?,
        };
        let next_value = match &self.value {
            Some(v) => Some(value_update(v, &self.universe, &selection.batch, self.config.value_lr, self.config.value_epochs)?),
            None => None,
        };
        self.cumulative_sim_time_s += step_time;
        let record = record_step(&StepObservation {
            step,
            cumulative_sim_time_s: self.cumulative_sim_time_s,
            universe: &self.universe,
            policy: &self.policy,
            pi_ref: &self.pi_ref,
            selection: &selection,
            gradient: &gradient,
            value: self.value.as_ref(),
            sampler: &self.sampler,
            options: &self.config.record,
        })?;
        self.total_generated += selection.generated_rollouts_total;
        self.total_wasted += selection.wasted_rollouts;
        self.policy = next_policy;
        if next_value.is_some() {
            self.value = next_value;
        }
        self.records.push(record);
        Ok(self.records.last())
    }

    pub fn finish(self) -> RunTrace {
        let final_mean_success = self.universe.prompts().iter().map(|p| self.policy.success_prob(p)).sum::<f64>()
            / self.universe.len() as f64;
        RunTrace {
            termination: self.termination.unwrap_or(Termination::MaxSteps),
            records: self.records,
            initial_policy: self.pi_ref,
            final_policy: self.policy,
            final_value: self.value,
            total_generated_rollouts: self.total_generated,
            total_wasted_rollouts: self.total_wasted,
            final_mean_success,
            setup: self.setup,
            config: self.config,
        }
    }
}

/// Run `config` until its budget is spent or selection starves.
pub fn run(config: &RunConfig) -> Result<RunTrace> {
    let mut sim = Simulation::new(config.clone())?;
    while sim.step()?.is_some() {}
    Ok(sim.finish())
}
