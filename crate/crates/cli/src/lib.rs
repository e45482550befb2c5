//! Batch front-end for the `wsp` estimators: scenario configuration,
//! experiment execution, matrix I/O and SVG error plots.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod svg;

pub use commands::{run, Cli};
pub use config::{EstimatorKind, Scenario, ScenarioConfig};
pub use error::CliError;
