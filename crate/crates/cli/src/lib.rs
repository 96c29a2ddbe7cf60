//! Batch front-end of the dimer simulator: TOML configuration, run modes,
//! CSV and metadata output.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, Mode, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{execute, run_to_dir, RunFiles};
