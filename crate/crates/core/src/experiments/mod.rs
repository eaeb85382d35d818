//! Experiment harness: overfitting demo, recovery-error grids, scaling
//! studies and the restricted-isometry probe.
//!
//! Drivers run trials on the current rayon pool. Results are collected in
//! index order, so reports do not depend on the worker count.

pub mod config;
mod demo;
mod grid;
mod pipeline;
pub mod plot;
pub mod report;
mod rip_probe;
mod scaling;
pub mod stats;

pub use config::{Axis, DemoConfig, GridConfig, RipConfig, ScalingConfig};
pub use demo::{demo_seeds, run_overfit_demo, DemoOutcome, DemoSummary, CURVES_FILE, TRAJECTORY_FILE};
pub use grid::{
    cell_seeds, run_cell, run_grid, CellTrial, FlaggedTrial, GridCellResult, GridOutcome, TrialSummary, ORACLE_CSV,
    ORACLE_PNG, SELECTED_CSV, SELECTED_PNG, TRIALS_FILE,
};
pub use pipeline::{run_trial, GdTemplate, Problem, TrialOutcome, TrialSeeds, TrialSpec};
pub use report::{Assertion, Report};
pub use rip_probe::{run_rip_probe, RipLevel, RipOutcome, RATIOS_FILE};
pub use scaling::{
    run_scaling_study, scaling_seeds, ScalingOutcome, ScalingPoint, ScalingRun, MIN_POINTS, MIN_TRIALS, POINTS_FILE,
    RUNS_FILE,
};

/// Base seed used by every default configuration.
pub const STANDARD_SEED: u64 = 20240601;

/// Environment variable holding the worker count for trial-level
/// parallelism.
pub const WORKERS_ENV: &str = "LRSENSE_WORKERS";

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w| w > 0)
}
