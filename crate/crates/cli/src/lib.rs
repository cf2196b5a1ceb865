//! Pipeline orchestration for the `wismc` command: ingest tick data,
//! estimate models, simulate synthetic series and compare their statistics
//! with the real ones.

pub mod commands;
pub mod config;
pub mod error;
pub mod layout;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
