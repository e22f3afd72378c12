use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A group drawn under an older policy was offered to the purely on-policy estimator.
    #[error("stale rollouts for prompt {prompt_id}: sampled at step {sampled_at}, policy is at step {policy_step}")]
    Stale {
        prompt_id: u64,
        sampled_at: u64,
        policy_step: u64,
    },

    #[error("{strategy} starved: fewer than {needed} usable groups after {rounds} sampling rounds")]
    Starvation {
        strategy: &'static str,
        needed: usize,
        rounds: usize,
    },

    #[error("pre-filter kept no prompts (p_low={p_low}, p_high={p_high}); widen the thresholds")]
    EmptyFilter { p_low: f64, p_high: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
