//! Simulator for comparing prompt-selection strategies in group-baseline
//! policy-gradient training on a synthetic task.
//!
//! Prompts carry a latent difficulty and a feature vector; the policy's
//! success probability is a logistic function of both, so every expectation
//! the strategies depend on is available in closed form.

pub mod env;
pub mod error;
pub mod metrics;
pub mod objective;
pub mod runner;
pub mod selfcheck;
pub mod stats;
pub mod strategies;
pub mod value;

pub use error::{Result, SimError};
