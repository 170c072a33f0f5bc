//! Scenario definition, closed-loop runs, λ sweeps and sparse-recovery scoring.

pub mod output;
pub mod recovery;
pub mod scenario;
pub mod simulation;
pub mod sweep;
pub mod trajectory;

pub use recovery::{
    classify_sparsity, confusion_counts, precision_recall_f1, true_support, ConfusionCounts, RecoveryScores,
};
pub use scenario::SimConfig;
pub use simulation::{frozen_stack_flow, run_scenario, RunMetrics, RunResult, RunSeries};
pub use sweep::{lambda_dir_name, lambda_sweep, lambda_sweep_with, SweepReport, SweepRow};
pub use trajectory::SumOfSines;
