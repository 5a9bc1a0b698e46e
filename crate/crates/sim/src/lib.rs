//! Monte-Carlo harness, configuration and CSV output for the
//! `losmimo-core` estimators.

pub mod cli;
pub mod config;
pub mod harness;
pub mod output;

pub use config::{parse_config, ConfigError, EstimatorKind, ExperimentConfig, ExperimentKind, OmegaCrb, Pairing, Parameter, PilotCount};
pub use harness::{bound_records, channel_mse, omega_mse, run_experiment, run_experiment_with_threads, HarnessError, MseRecord};
pub use output::{emit_csv, write_csv};
