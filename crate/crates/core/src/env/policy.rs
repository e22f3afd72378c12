//! The logistic policy: `p(x) = sigmoid(theta . phi(x) - d_x)`.

use serde::{Deserialize, Serialize};

use crate::env::universe::PromptSpec;

/// Probabilities are kept this far away from 0 and 1.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub fn open_unit_sigmoid(z: f64) -> f64 {
    sigmoid(z).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub theta: Vec<f64>,
    pub step: u64,
}

impl PolicyState {
    pub fn zeros(dim: usize) -> Self {
        Self { theta: vec![0.0; dim], step: 0 }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Probability that one rollout on `prompt` is correct. Always in (0, 1).
    ///
    /// # Panics
    /// If the prompt's feature dimension differs from the policy's.
    pub fn success_prob(&self, prompt: &PromptSpec) -> f64 {
        open_unit_sigmoid(dot(&self.theta, &prompt.features) - prompt.difficulty)
    }
}

/// Free-function form of [`PolicyState::success_prob`].
pub fn success_prob(policy: &PolicyState, prompt: &PromptSpec) -> f64 {
    policy.success_prob(prompt)
}
