//! Front end for `gbs-core`: configuration, file formats, sampling drivers,
//! kernel benchmarks and validation reports behind the `gbs` binary.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod files;
pub mod sample;
pub mod validate;

pub use commands::{run, Cli, RunManifest};
pub use error::{CliError, CliResult};
