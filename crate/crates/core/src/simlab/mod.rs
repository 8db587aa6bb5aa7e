//! Simulation designs, the experiment runner and its outputs.

pub mod calibrate;
pub mod config;
pub mod design;
pub mod golden;
pub mod grid;
pub mod outputs;
pub mod runner;

pub use config::{default_a_grid, BetaMode, Criterion, LambdaSimScale, Method, SimConfig};
pub use design::{build_covariance, covariance, normalize_columns, sample_beta, sample_dataset, CovFactor, Design};
pub use outputs::{emit_outputs, plot_script, read_records, read_summaries, SUMMARY_COLUMNS, TRIAL_COLUMNS};
pub use runner::{aggregate, annotate, run_setting, run_setting_detailed, sort_records, SettingRun, SummaryRow, TrialError, TrialRecord};
