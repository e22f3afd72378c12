//! The synthetic environment: prompts, the logistic policy, rollouts and the
//! generation-time cost model.

pub mod cost;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod universe;

pub use cost::{generation_time, CostModel};
pub use policy::{sigmoid, success_prob, PolicyState};
pub use rng::{Purpose, Streams};
pub use rollout::{sample_length, sample_rollout_group, LengthModel, Rollout, RolloutGroup, RolloutSampler};
pub use universe::{
    make_universe, DifficultyDistribution, LengthProfile, MixtureComponent, PromptSpec, PromptUniverse,
    UniverseConfig,
};
