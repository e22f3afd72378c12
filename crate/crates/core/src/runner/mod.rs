//! Experiment orchestration: the training loop, budgets, sweeps and reports.

mod config;
mod report;
mod sim;

pub use config::{Budget, LrScaling, Optimizer, RunConfig};
pub use report::{
    compare_strategies, ev_curve, sweep_batch_size, write_ev_csv, write_long_csv, write_run_outputs, ComparisonReport, EvPoint, RunSummary,
    SweepPoint, SweepReport,
};
pub use sim::{run, RunTrace, Setup, Simulation, Termination};
