//! Run orchestration for the `morphofilter` binary: configuration, commands
//! and run-directory persistence.

pub mod commands;
pub mod config;
pub mod error;
pub mod store;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use store::{RunDir, RunManifest};
