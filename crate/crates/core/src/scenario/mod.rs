//! Scenario layer: configuration, fixtures, convergence studies, the invariant
//! suite and the subcommands built on them.

pub mod commands;
pub mod config;
pub mod converge;
pub mod fixtures;
pub mod report;
pub mod suite;

pub use commands::{run, Command, Outcome};
pub use config::ScenarioConfig;
