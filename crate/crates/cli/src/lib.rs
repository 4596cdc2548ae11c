//! Experiment runner: TOML experiment files in, CSV tables and JSONL traces out.

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{ExperimentKind, ExperimentSpec, Params};
pub use error::{Error, Result};
