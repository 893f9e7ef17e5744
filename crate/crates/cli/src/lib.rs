//! Configuration, scenario runners and CSV reporting behind the `asyncgl`
//! binary.

pub mod certify;
pub mod config;
pub mod error;
pub mod run;
pub mod suite;

pub use config::{load_config, ScenarioConfig};
pub use error::CliError;
pub use run::{run_scenario, RunOutcome, RunSummary};
pub use suite::{run_suite, SuiteName, SuiteOptions};
