//! Two-regime generation-time model.
//!
//! A batch finishes when its longest response finishes (latency term) or when
//! the engine has pushed every token through its `capacity` concurrent
//! streams (throughput term), whichever is later.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Tokens per second for a single stream.
    pub per_stream_rate: f64,
    /// Streams that can run concurrently at full rate.
    pub capacity: u32,
    /// Hard cap on response length in tokens.
    pub context_limit: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { per_stream_rate: 50.0, capacity: 1024, context_limit: 4096 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.per_stream_rate > 0.0 && self.per_stream_rate.is_finite()) {
            return Err(SimError::Config("per_stream_rate must be positive".into()));
        }
        if self.capacity == 0 || self.context_limit == 0 {
            return Err(SimError::Config("capacity and context_limit must be at least 1".into()));
        }
        Ok(())
    }

    /// Simulated seconds to generate a batch with the given response lengths.
    /// An empty batch costs nothing.
    pub fn generation_time(&self, lengths: impl IntoIterator<Item = u32>) -> f64 {
        let (max, total) = lengths
            .into_iter()
            .fold((0u32, 0u64), |(m, t), l| (m.max(l), t + l as u64));
        let latency = max as f64 / self.per_stream_rate;
        let throughput = total as f64 / (self.capacity as f64 * self.per_stream_rate);
        latency.max(throughput)
    }

    /// Batch size at which the two terms meet for batches of identical
    /// lengths: `L / R = b L / (C R)` gives `b* = C`.
    pub fn knee_equal_length(&self) -> f64 {
        self.capacity as f64
    }

    /// Knee for a batch whose longest response is `max_len` and mean is
    /// `mean_len`: `b* = C * max_len / mean_len`.
    pub fn knee(&self, max_len: f64, mean_len: f64) -> f64 {
        self.capacity as f64 * max_len / mean_len
    }
}

/// Free-function form of [`CostModel::generation_time`].
///
/// # Panics
/// On an empty batch.
pub fn generation_time(lengths: &[u32], cost: &CostModel) -> f64 {
    assert!(!lengths.is_empty(), "generation_time needs a non-empty batch");
    cost.generation_time(lengths.iter().copied())
}
