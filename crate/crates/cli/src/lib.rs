//! Frame ingestion, file formats and the `keyfuse` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod frames;
pub mod pipeline;
pub mod records;

pub use error::{CliError, Result};
