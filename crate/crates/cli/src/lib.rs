//! Scenario loading and command execution for the `stackgov` binary.

pub mod run;
pub mod scenario;

pub use run::{run, run_batch, Command, CliError, Overrides, RunReport};
pub use scenario::{parse_scenario, ParseError, ScenarioFile};
