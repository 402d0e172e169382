//! Experiment configuration, reference trajectories and the comparison
//! harness.

mod config;
mod harness;
mod trajectory;

pub use config::{
    ExperimentConfig, InverseConfig, InverseKind, StartupExclusion, SystemSpec, TrainingDataConfig,
};
pub use harness::{
    alpha_sweep, digest_json, fitted_budget, metrics, prepare_inverse, read_step_log_csv, residual_log,
    run_comparison, run_policy, run_strategies, run_strategy, source_training_traces, step_rows,
    train_source_inverse, write_step_log_csv, write_step_log_json, Metrics, RunReport, RunStatus, StepRow,
    Strategy, StrategyOutcome, SweepPoint, SweepReport, REPORT_VERSION,
};
pub use trajectory::{
    ingest_csv_trajectory, make_test_trajectory, read_trajectory_csv, write_trajectory_csv, Signal,
    SineComponent, TrajectorySpec,
};
