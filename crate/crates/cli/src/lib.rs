//! Command-line scenario runner for `amspace`.

pub mod config;
pub mod emit;
pub mod error;
pub mod formula;
pub mod report;
pub mod scenario;

pub use config::{resolve, Overrides, ScenarioName, Settings};
pub use emit::{write_outputs, Formats};
pub use error::CliError;
pub use report::Report;
pub use scenario::run_scenario;
