//! Brute-force oracle checks runnable from the command line.

use rand::Rng;

use crate::env::{CostModel, PolicyState, PromptSpec, Purpose, Streams};
use crate::objective::{analytic_gradient, enumerated_expected_gradient, expected_sq_advantage};
use crate::strategies::greedy_downsample;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A prompt with success probability `p` under the zero policy.
pub fn prompt_with_prob(p: f64, phi: Vec<f64>) -> PromptSpec {
    PromptSpec { id: 0, difficulty: -logit(p), features: phi, base_length: 1 }
}

/// Exact expectation of the n = 2 estimator against `((n-1)/n) p (1-p) phi`.
pub fn gradient_enumeration() -> CheckOutcome {
    let policy = PolicyState::zeros(3);
    let mut worst: f64 = 0.0;
    for i in 1..=9 {
        let prompt = prompt_with_prob(i as f64 / 10.0, vec![1.0, -0.7, 2.5]);
        let p = policy.success_prob(&prompt);
        let got = enumerated_expected_gradient(&policy, &prompt, 2);
        for (g, x) in got.iter().zip(&prompt.features) {
            let want = 0.5 * p * (1.0 - p) * x;
            worst = worst.max((g - want).abs() / want.abs().max(1e-300));
        }
    }
    CheckOutcome {
        name: "gradient enumeration (n=2)",
        passed: worst <= 1e-12,
        detail: format!("max relative error {worst:.3e}"),
    }
}

/// `p (1 - p)` and the analytic gradient norm peak uniquely at p = 0.5.
pub fn advantage_peak() -> CheckOutcome {
    let grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let policy = PolicyState::zeros(2);
    let sq: Vec<f64> = grid.iter().map(|&p| expected_sq_advantage(p)).collect();
    let norms: Vec<f64> = grid
        .iter()
        .map(|&p| {
            let g = analytic_gradient(&policy, &prompt_with_prob(p, vec![1.0, 0.3]));
            g.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    // grid index 49 is p = 0.5
    let unique_peak = |v: &[f64]| v.iter().enumerate().all(|(j, &x)| j == 49 || x < v[49]);
    let passed = unique_peak(&sq) && unique_peak(&norms);
    CheckOutcome { name: "squared-advantage peak at p=0.5", passed, detail: format!("peak {:.6}", sq[49]) }
}

/// Greedy downsampling against exhaustive subset search.
pub fn greedy_optimality(instances: usize, seed: u64) -> CheckOutcome {
    let streams = Streams::new(seed);
    let mut failures = 0;
    for t in 0..instances as u64 {
        let mut rng = streams.substream(Purpose::Probe, &[u64::MAX, t]);
        let pool = rng.random_range(1..=12usize);
        let m = rng.random_range(1..=pool.min(6));
        let tau = rng.random::<f64>();
        let scores: Vec<f64> = (0..pool).map(|_| rng.random::<f64>()).collect();
        let cost = |idx: &[usize]| idx.iter().map(|&i| (scores[i] - tau).abs()).sum::<f64>();
        let greedy = cost(&greedy_downsample(&scores, tau, m).expect("pool >= m"));
        let best = (0u32..1 << pool)
            .filter(|mask| mask.count_ones() as usize == m)
            .map(|mask| cost(&(0..pool).filter(|i| mask >> i & 1 == 1).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min);
        if (greedy - best).abs() > 1e-12 {
            failures += 1;
        }
    }
    CheckOutcome {
        name: "greedy downsampling optimality",
        passed: failures == 0,
        detail: format!("{failures} of {instances} instances off the exhaustive optimum"),
    }
}

/// Closed-form equal-length knee against a direct scan of batch sizes.
pub fn cost_knee(cost: &CostModel) -> CheckOutcome {
    let len = 1000u32;
    let t1 = cost.generation_time([len]);
    let scanned = (1..=8 * cost.capacity as usize)
        .find(|&b| cost.generation_time(std::iter::repeat_n(len, b)) > t1)
        .map(|b| b - 1);
    let knee = cost.knee_equal_length() as usize;
    CheckOutcome {
        name: "cost-model knee",
        passed: scanned == Some(knee),
        detail: format!("closed form {knee}, scan {scanned:?}"),
    }
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![gradient_enumeration(), advantage_peak(), greedy_optimality(200, seed), cost_knee(&CostModel::default())]
}
