//! Platform side of the surrogate-assisted PSO: RAPL counters, JSON
//! configuration, model files, the experiment harness, CSV reports and the
//! command line.

pub mod cli;
pub mod config;
pub mod harness;
pub mod model_io;
pub mod rapl;
pub mod report;

pub use config::{load_config, parse_config, Config, ConfigError};
