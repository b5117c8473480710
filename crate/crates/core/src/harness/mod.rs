//! Experiment configuration, file-based pipeline stages and the scenario
//! corpus used for end-to-end evaluation.

mod config;
pub mod corpus;
mod runner;

pub use config::{ExperimentConfig, Seeds, CONFIG_SCHEMA_VERSION};
pub use corpus::{evaluate, Evaluation, Scenario};
pub use runner::*;
