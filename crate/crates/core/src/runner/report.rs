use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Budget, RunConfig};
use super::sim::{run, RunTrace, Termination};
use crate::error::Result;
use crate::metrics::{format_g9, write_csv};
use crate::stats::{mean, ols};
use crate::strategies::StrategyConfig;

/// Headline numbers of one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: String,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub steps: usize,
    pub sim_time_s: f64,
    pub final_mean_success: f64,
    pub total_generated_rollouts: usize,
    pub total_wasted_rollouts: usize,
    pub mean_effective_ratio: f64,
    pub mean_step_time_s: f64,
    /// OLS slope of the selected prompts' reference difficulty against step.
    pub difficulty_slope: Option<f64>,
    pub termination: Termination,
}

impl RunSummary {
    pub fn of(trace: &RunTrace) -> Self {
        let recs = &trace.records;
        let steps = recs.len();
        let avg = |f: fn(&crate::metrics::MetricsRecord) -> f64| {
            if steps == 0 { f64::NAN } else { mean(&recs.iter().map(f).collect::<Vec<_>>()) }
        };
        let xs: Vec<f64> = recs.iter().map(|r| r.step as f64).collect();
        let ys: Vec<f64> = recs.iter().map(|r| r.pi_ref_difficulty_of_selected).collect();
        Self {
            strategy: trace.config.strategy.name().to_string(),
            m: trace.config.strategy.m,
            n: trace.config.strategy.n,
            seed: trace.config.seed,
            steps,
            sim_time_s: trace.cumulative_sim_time_s(),
            final_mean_success: trace.final_mean_success,
            total_generated_rollouts: trace.total_generated_rollouts,
            total_wasted_rollouts: trace.total_wasted_rollouts,
            mean_effective_ratio: avg(|r| r.effective_ratio),
            mean_step_time_s: avg(|r| r.step_generation_time_s),
            difficulty_slope: ols(&xs, &ys).ok().map(|f| f.slope),
            termination: trace.termination.clone(),
        }
    }
}

/// Write `trace` as a CSV at `csv_path` plus a JSON sidecar with the config
/// echo and summary. Returns the sidecar path.
pub fn write_run_outputs(trace: &RunTrace, csv_path: &Path) -> Result<PathBuf> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(&trace.records, BufWriter::new(File::create(csv_path)?))?;
    let sidecar = csv_path.with_extension("json");
    #[derive(Serialize)]
    struct Sidecar<'a> {
        config: &'a RunConfig,
        summary: RunSummary,
        setup: &'a Option<super::sim::Setup>,
        final_policy: &'a crate::env::PolicyState,
        final_value: &'a Option<crate::value::ValueModelState>,
    }
    let body = Sidecar {
        config: &trace.config,
        summary: RunSummary::of(trace),
        setup: &trace.setup,
        final_policy: &trace.final_policy,
        final_value: &trace.final_value,
    };
    let mut w = BufWriter::new(File::create(&sidecar)?);
    serde_json::to_writer_pretty(&mut w, &body)?;
    w.flush()?;
    Ok(sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m: usize,
    pub n: usize,
    pub batch: usize,
    pub runs: Vec<RunSummary>,
    /// Mean over seeds of the final analytic success.
    pub mean_final_success: f64,
    pub mean_step_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub budget: Budget,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
    /// Knee of the cost model for equal-length batches.
    pub knee_equal_length: f64,
}

/// Run `base` at every `(m, n)` for every seed, in parallel.
pub fn sweep_batch_size(base: &RunConfig, pairs: &[(usize, usize)], seeds: &[u64]) -> Result<SweepReport> {
    let jobs: Vec<(usize, u64)> = (0..pairs.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let summaries: Vec<(usize, RunSummary)> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (m, n) = pairs[i];
            let cfg = RunConfig {
                strategy: StrategyConfig { m, n, ..base.strategy.clone() },
                seed,
                output: None,
                ..base.clone()
            };
            run(&cfg).map(|t| (i, RunSummary::of(&t)))
        })
        .collect::<Result<_>>()?;
    let points = pairs
        .iter()
        .enumerate()
        .map(|(i, &(m, n))| {
            let runs: Vec<RunSummary> = summaries.iter().filter(|(j, _)| *j == i).map(|(_, s)| s.clone()).collect();
            SweepPoint {
                m,
                n,
                batch: m * n,
                mean_final_success: mean(&runs.iter().map(|r| r.final_mean_success).collect::<Vec<_>>()),
                mean_step_time_s: mean(&runs.iter().map(|r| r.mean_step_time_s).collect::<Vec<_>>()),
                runs,
            }
        })
        .collect();
    Ok(SweepReport { budget: base.budget, seeds: seeds.to_vec(), points, knee_equal_length: base.cost.knee_equal_length() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub runs: Vec<RunSummary>,
    #[serde(skip)]
    pub traces: Vec<RunTrace>,
}

/// Run every strategy on every seed against the same base config.
pub fn compare_strategies(base: &RunConfig, strategies: &[StrategyConfig], seeds: &[u64]) -> Result<ComparisonReport> {
    let jobs: Vec<(usize, u64)> = (0..strategies.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let traces: Vec<RunTrace> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let cfg = RunConfig { strategy: strategies[i].clone(), seed, output: None, ..base.clone() };
            run(&cfg)
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport { runs: traces.iter().map(RunSummary::of).collect(), traces })
}

/// Plot-ready long format: `run,strategy,seed,step,cumulative_sim_time_s,metric,value`.
pub fn write_long_csv<W: Write>(traces: &[RunTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "strategy", "seed", "step", "cumulative_sim_time_s", "metric", "value"])?;
    for (i, t) in traces.iter().enumerate() {
        let run = i.to_string();
        let seed = t.config.seed.to_string();
        for r in &t.records {
            let metrics: [(&str, Option<f64>); 8] = [
                ("train_reward_pre_filter", Some(r.train_reward_pre_filter)),
                ("train_reward_post_filter", Some(r.train_reward_post_filter)),
                ("effective_ratio", Some(r.effective_ratio)),
                ("grad_norm", Some(r.grad_norm)),
                ("value_ev", r.value_ev),
                ("wasted_rollouts", Some(r.wasted_rollouts as f64)),
                ("mean_staleness", Some(r.mean_staleness)),
                ("pi_ref_difficulty_of_selected", Some(r.pi_ref_difficulty_of_selected)),
            ];
            let step = r.step.to_string();
            let time = format_g9(r.cumulative_sim_time_s);
            for (name, v) in metrics {
                if let Some(v) = v {
                    w.write_record([&run, t.config.strategy.name(), &seed, &step, &time, name, &format_g9(v)])?;
                }
            }
            for (j, ev) in r.empirical_ev_by_j.iter().flatten() {
                let name = format!("empirical_ev_j{j}");
                w.write_record([&run, t.config.strategy.name(), &seed, &step, &time, &name, &format_g9(*ev)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Value-model accuracy against the `j`-sample estimator at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvPoint {
    pub step: u64,
    pub value_ev: f64,
    /// Samples per prompt an empirical estimator would need to match `value_ev`.
    pub equivalent_samples: f64,
    /// `(j, sampled EV, closed-form EV)`.
    pub by_j: Vec<(usize, f64, f64)>,
}

/// Run `config` (which must carry a value model) and measure EVs every
/// `every` steps, including step 0 and the final state.
pub fn ev_curve(config: &RunConfig, js: &[usize], every: u64) -> Result<Vec<EvPoint>> {
    use crate::value::{analytic_empirical_ev, empirical_estimator_ev, equivalent_samples, value_ev};
    let mut sim = super::Simulation::new(config.clone())?;
    if sim.value().is_none() {
        return Err(crate::SimError::Config("ev-curve needs a strategy with a value model (pcl)".into()));
    }
    let streams = crate::env::Streams::new(config.seed);
    let every = every.max(1);
    let mut out = Vec::new();
    let measure = |sim: &super::Simulation| -> Result<EvPoint> {
        let (u, policy, value) = (sim.universe(), sim.policy(), sim.value().expect("checked above"));
        let ev = value_ev(value, u, policy)?;
        let by_j = js
            .iter()
            .map(|&j| Ok((j, empirical_estimator_ev(u, policy, j, &streams, 0)?, analytic_empirical_ev(u, policy, j)?)))
            .collect::<Result<_>>()?;
        Ok(EvPoint { step: policy.step, value_ev: ev, equivalent_samples: equivalent_samples(u, policy, ev)?, by_j })
    };
    loop {
        if sim.policy().step % every == 0 {
            out.push(measure(&sim)?);
        }
        if sim.step()?.is_none() {
            break;
        }
    }
    if out.last().map(|p| p.step) != Some(sim.policy().step) {
        out.push(measure(&sim)?);
    }
    Ok(out)
}

pub fn write_ev_csv<W: Write>(points: &[EvPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "value_ev", "equivalent_samples", "j", "empirical_ev", "analytic_ev"])?;
    for p in points {
        for &(j, sampled, analytic) in &p.by_j {
            w.write_record([
                p.step.to_string(),
                format_g9(p.value_ev),
                format_g9(p.equivalent_samples),
                j.to_string(),
                format_g9(sampled),
                format_g9(analytic),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
