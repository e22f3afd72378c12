//! The online value model and explained-variance diagnostics.
//!
//! `V(x) = sigmoid(w . phi(x))`, fit by gradient descent on
//! `sum_i (V(x_i) - p_hat_i)^2` over each training batch. It sees only the
//! rollouts the policy update already paid for.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::policy::{dot, open_unit_sigmoid};
use crate::env::{PolicyState, PromptSpec, PromptUniverse, Purpose, RolloutGroup, Streams};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueModelState {
    pub weights: Vec<f64>,
    /// Policy step whose batch last updated the model; -1 before any update.
    pub trained_through_step: i64,
}

impl ValueModelState {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], trained_through_step: -1 }
    }

    /// Predicted expected reward, always in (0, 1).
    ///
    /// # Panics
    /// If the feature dimension differs from the model's.
    pub fn predict(&self, prompt: &PromptSpec) -> f64 {
        open_unit_sigmoid(dot(&self.weights, &prompt.features))
    }
}

pub fn predict(value: &ValueModelState, prompt: &PromptSpec) -> f64 {
    value.predict(prompt)
}

/// `sum_i (V(x_i) - p_hat_i)^2`.
pub fn value_loss(value: &ValueModelState, universe: &PromptUniverse, batch: &[RolloutGroup]) -> f64 {
    batch
        .iter()
        .map(|g| {
            let e = value.predict(universe.prompt(g.prompt_id)) - g.mean_reward();
            e * e
        })
        .sum()
}

/// `epochs` full-batch descent steps on the squared loss. The new state is
/// marked as trained through the policy step the batch was drawn under.
pub fn value_update(
    value: &ValueModelState,
    universe: &PromptUniverse,
    batch: &[RolloutGroup],
    lr: f64,
    epochs: usize,
) -> Result<ValueModelState> {
    if batch.is_empty() {
        return Err(SimError::Config("value_update needs a non-empty batch".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(SimError::Config(format!("value learning rate must be positive, got {lr}")));
    }
    let dim = value.weights.len();
    let mut weights = value.weights.clone();
    for _ in 0..epochs {
        let mut grad = vec![0.0; dim];
        let mut loss = 0.0;
        for g in batch {
            let prompt = universe.prompt(g.prompt_id);
            if prompt.features.len() != dim {
                return Err(SimError::DimensionMismatch { expected: dim, got: prompt.features.len() });
            }
            let v = open_unit_sigmoid(dot(&weights, &prompt.features));
            let err = v - g.mean_reward();
            loss += err * err;
            let scale = 2.0 * err * v * (1.0 - v);
            for (gi, x) in grad.iter_mut().zip(&prompt.features) {
                *gi += scale * x;
            }
        }
        if !loss.is_finite() || grad.iter().any(|x| !x.is_finite()) {
            return Err(SimError::NonFinite(format!("value loss {loss}; update rejected")));
        }
        for (w, gi) in weights.iter_mut().zip(&grad) {
            *w -= lr * gi;
        }
    }
    let trained_through_step = batch.iter().map(|g| g.newest_step()).max().expect("non-empty") as i64;
    Ok(ValueModelState { weights, trained_through_step })
}

fn population_variance(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
}

/// `1 - Var(truth - pred) / Var(truth)`. May be negative.
pub fn explained_variance(truths: &[f64], preds: &[f64]) -> Result<f64> {
    if truths.len() != preds.len() {
        return Err(SimError::DimensionMismatch { expected: truths.len(), got: preds.len() });
    }
    if truths.len() < 2 {
        return Err(SimError::UndefinedMetric("explained variance needs at least two points".into()));
    }
    let var_truth = population_variance(truths);
    if var_truth == 0.0 || !var_truth.is_finite() {
        return Err(SimError::UndefinedMetric("truths have zero variance".into()));
    }
    let residuals: Vec<f64> = truths.iter().zip(preds).map(|(t, p)| t - p).collect();
    Ok(1.0 - population_variance(&residuals) / var_truth)
}

/// Analytic success probabilities of every prompt in the universe.
pub fn analytic_truths(universe: &PromptUniverse, policy: &PolicyState) -> Vec<f64> {
    universe.prompts().iter().map(|p| policy.success_prob(p)).collect()
}

/// EV of the value model against the analytic success probabilities.
pub fn value_ev(value: &ValueModelState, universe: &PromptUniverse, policy: &PolicyState) -> Result<f64> {
    let preds: Vec<f64> = universe.prompts().iter().map(|p| value.predict(p)).collect();
    explained_variance(&analytic_truths(universe, policy), &preds)
}

/// EV of the `j`-sample mean reward as a difficulty predictor, with truth
/// taken as the analytic success probability. `replicate` selects an
/// independent draw of the rollouts.
pub fn empirical_estimator_ev(
    universe: &PromptUniverse,
    policy: &PolicyState,
    j: usize,
    streams: &Streams,
    replicate: u64,
) -> Result<f64> {
    if j == 0 {
        return Err(SimError::Config("j must be at least 1".into()));
    }
    let truths = analytic_truths(universe, policy);
    let preds: Vec<f64> = universe
        .prompts()
        .iter()
        .zip(&truths)
        .map(|(prompt, &p)| {
            let mut rng = streams.substream(Purpose::EmpiricalEv, &[policy.step, replicate, prompt.id, j as u64]);
            (0..j).filter(|_| rng.random::<f64>() < p).count() as f64 / j as f64
        })
        .collect();
    explained_variance(&truths, &preds)
}

/// Closed-form expectation of [`empirical_estimator_ev`]:
/// `1 - E_x[p (1 - p)] / (j Var_x(p))`.
pub fn analytic_empirical_ev(universe: &PromptUniverse, policy: &PolicyState, j: usize) -> Result<f64> {
    let truths = analytic_truths(universe, policy);
    let var = population_variance(&truths);
    if var == 0.0 {
        return Err(SimError::UndefinedMetric("truths have zero variance".into()));
    }
    let noise = truths.iter().map(|p| p * (1.0 - p)).sum::<f64>() / truths.len() as f64;
    Ok(1.0 - noise / (j as f64 * var))
}

/// Number of samples per prompt whose estimator would match an EV of `ev`.
pub fn equivalent_samples(universe: &PromptUniverse, policy: &PolicyState, ev: f64) -> Result<f64> {
    let truths = analytic_truths(universe, policy);
    let var = population_variance(&truths);
    if var == 0.0 {
        return Err(SimError::UndefinedMetric("truths have zero variance".into()));
    }
    let noise = truths.iter().map(|p| p * (1.0 - p)).sum::<f64>() / truths.len() as f64;
    Ok(if ev >= 1.0 { f64::INFINITY } else { noise / ((1.0 - ev) * var) })
}
