//! The pipeline stages. Each reads its inputs from, and writes its outputs
//! to, the configured output directory.

mod analyze;
mod estimate;
mod ingest;
mod simulate;

pub use analyze::{analyze, compare, write_comparison, AnalyzeSummary};
pub use estimate::{estimate, EstimateReport, FollowerReport, LambdaCandidate, SymbolReport};
pub use ingest::{ingest, IngestManifest, IngestedSymbol};
pub use simulate::{simulate, SimulateManifest, SyntheticSeries};

use crate::error::{CliError, CliResult};

/// Flags shared by every stage.
#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Use artifacts whose configuration hash differs from the current one.
    pub force: bool,
    /// Worker threads; `None` lets the pool decide.
    pub jobs: Option<usize>,
}

impl Options {
    pub fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Config(format!("worker pool: {e}")))
    }

    /// Errors on a hash mismatch unless forced, in which case it warns.
    pub fn check_hash(&self, what: &str, found: &str, expected: &str) -> CliResult<()> {
        if found == expected {
            return Ok(());
        }
        if self.force {
            log::warn!("{what} was produced under configuration {found}, current is {expected}");
            return Ok(());
        }
        Err(CliError::HashMismatch(format!(
            "{what} was produced under configuration {found}, current is {expected}"
        )))
    }
}
