//! File formats, the staged experiment pipeline and the command-line
//! interface on top of `teamcoach-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod rows;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use pipeline::{Outcome, Pipeline, Stage};
