//! Experiment driver: configuration parsing and the `fom`, `pod`, `rom`,
//! `compare` and `sweep` stages over plain-text artifacts.

pub mod config;
pub mod pipeline;

pub use config::{
    parse_config, parse_config_str, ConfigError, ExperimentConfig, ModelName, Problem,
};
pub use pipeline::{compare_models, run_sweep, Comparison, Offline, Prepared, SweepPoint};
