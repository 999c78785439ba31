//! Batch front-end: configuration parsing, scenario sweeps over
//! `(alpha, gamma1)`, trajectory and cost tables, and equilibrium reports.

pub mod calibrate;
pub mod config;
pub mod output;
pub mod report;
pub mod sweep;

pub use config::{parse_config, ConfigError, RunConfig};
pub use sweep::{run_sweep, SweepResult};
