//! Experiment configuration and the batch runner behind the command line.

mod config;
mod runner;

pub use config::{ExperimentConfig, ResolvedTask, BUILTIN_SUITE};
pub use runner::{
    ablation_config, aggregate, cmd_ablate, cmd_report, cmd_run, cmd_suite, run_dir, run_suite_on, AblationCheck, CellRun,
    ReferenceRow, Report, SeedMargin, SuiteOutcome, ABLATION_METHODS, REFERENCES_FILE, SNAPSHOT_FILE,
};
