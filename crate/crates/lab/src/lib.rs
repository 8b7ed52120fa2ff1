//! Experiment runner for entanglement-inflation studies: Monte Carlo ensembles,
//! parameter scans and persistency checks with deterministic per-sample seeding.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod reference;
pub mod report;
pub mod runner;

pub use config::{parse_ranks, CheckTolerances, Experiment, ExperimentConfig, Scenario, DESK_SAMPLES, FULL_SAMPLES};
pub use error::{LabError, Result};
pub use output::{emit_scatter, fmt_sig, ScatterRow};
pub use report::{Check, GroupSummary, SummaryReport, SCHEMA_VERSION};
pub use runner::{execute, run, RunOutput};

/// Exit code when `--check` finds a failing comparison.
pub const EXIT_CHECK_FAILED: i32 = 2;
