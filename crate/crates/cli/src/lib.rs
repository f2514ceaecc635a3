//! Command-line driver: configuration files, orchestration of the design
//! pipeline, and the JSON/CSV formats consumed by plotting scripts.

pub mod commands;
pub mod error;
pub mod schema;

pub use error::{CliError, CliResult};
