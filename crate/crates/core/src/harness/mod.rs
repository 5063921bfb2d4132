//! Configuration, run directories, and the commands behind the CLI.

mod acceptance;
mod commands;
mod config;
mod manifest;
mod trajectory;

pub use commands::{
    analyze_moments, classify, cmd_analyze, cmd_check_model, cmd_crossover_sweep, cmd_ensemble,
    cmd_hydro, cmd_simulate, crossover_table, moment_layout, static_variance, CheckModelReport,
    CrossoverRow, CrossoverVerdict, HydroReport, MomentColumn, RunSummary, JUMP_LOG_FILE,
    MOMENTS_FILE, REPORT_CSV_FILE, REPORT_FILE, SERIES_FILE,
};
pub use config::{
    ExperimentConfig, ExperimentKind, HydroSpec, Overrides, PairSpec, ProfileSpec, SweepSpec,
};
pub use manifest::{sha256_file, RunManifest, Telemetry, MANIFEST_FILE};
pub use trajectory::{bond_at, mean_current, simulate_trajectory, ObservableSpec, Quantity, TrajectoryRun};
pub use acceptance::{run_criterion, Check, CriterionOutcome, CRITERIA};
