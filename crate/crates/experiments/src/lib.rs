//! Experiment harness for the hesitator simulator.
//!
//! Sessions run in parallel on a fixed-size pool, but every session draws
//! from generators keyed by `(base_seed, session index)` and results are
//! gathered in index order, so outputs do not depend on the worker count.

pub mod export;
pub mod runner;
pub mod stats;
pub mod studies;

pub use export::{export_results, Format, ResultRef};
pub use runner::{run_condition, run_condition_full, run_indexed, run_one, BuiltProviders, Condition, EngineConfig, ExperimentError, ProviderNames, RunSettings, SessionSummary};
pub use stats::{success_rate, wilcoxon_signed_rank, Wilcoxon};
pub use studies::{
    run_ablation, run_overload_experiment, run_sweep, sign_changes, standard_conditions, total_sign_changes, AblationResult, Curve,
    OverloadCondition, OverloadResult, SweepResult, SweepSpec,
};
