//! Configuration-driven front end for `fbf-core`: solves, parameter sweeps, and
//! property suites, with CSV and JSON artifacts.

pub mod commands;
pub mod config;

pub use commands::{check, run, solve, sweep, Outcome};
pub use config::{Mode, MonitorName, RunConfig};
