//! Scenario files, run orchestration and run summaries for the
//! `continuum` tool.

pub mod bundled;
pub mod config;
pub mod run;
pub mod summary;

pub use config::{Analysis, ConfigError, ScenarioConfig};
pub use run::{run_scenario, RunOptions};
pub use summary::{Metric, RunSummary};
