use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wismc::artifact::{write_prices_csv, write_returns_csv};
use wismc::market_data::{align_price_series, compute_returns, resample_to_grid, TickSeries};

use super::Options;
use crate::config::RunConfig;
use crate::error::{Context, CliResult};
use crate::layout::{open, write_file, write_json, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedSymbol {
    pub symbol: String,
    pub ticks: usize,
    pub prices: usize,
    pub returns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub data_hash: String,
    pub interval_secs: u32,
    /// Start of the first common slot, epoch milliseconds.
    pub t0_ms: i64,
    pub symbols: Vec<IngestedSymbol>,
}

/// Reads every tick file, resamples onto the common grid and writes price
/// and return CSVs.
pub fn ingest(cfg: &RunConfig, opts: &Options) -> CliResult<IngestManifest> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let pool = opts.pool()?;

    let loaded: Vec<(usize, wismc::market_data::PriceSeries)> = pool.install(|| {
        cfg.symbols
            .par_iter()
            .map(|s| {
                let ticks = TickSeries::from_csv_reader(&s.name, open(&s.ticks)?)
                    .context(|| s.ticks.display().to_string())?;
                let grid = resample_to_grid(&ticks, cfg.interval_secs).context(|| format!("resampling {}", s.name))?;
                Ok((ticks.ticks().len(), grid))
            })
            .collect::<CliResult<_>>()
    })?;
    let (tick_counts, mut grids): (Vec<usize>, Vec<_>) = loaded.into_iter().unzip();
    align_price_series(&mut grids).context(|| "aligning symbols on a common grid".into())?;

    let mut symbols = Vec::with_capacity(grids.len());
    for ((s, grid), n_ticks) in cfg.symbols.iter().zip(&grids).zip(tick_counts) {
        let returns = compute_returns(grid).context(|| format!("returns of {}", s.name))?;
        write_file(&layout.prices(&s.name), |w| {
            write_prices_csv(w, grid).context(|| layout.prices(&s.name).display().to_string())
        })?;
        write_file(&layout.returns(&s.name), |w| {
            write_returns_csv(w, grid, &returns).context(|| layout.returns(&s.name).display().to_string())
        })?;
        log::info!("{}: {} ticks, {} prices, {} returns", s.name, n_ticks, grid.len(), returns.len());
        symbols.push(IngestedSymbol {
            symbol: s.name.clone(),
            ticks: n_ticks,
            prices: grid.len(),
            returns: returns.len(),
        });
    }
    let manifest = IngestManifest {
        data_hash: cfg.data_hash(),
        interval_secs: cfg.interval_secs,
        t0_ms: grids[0].t0_ms,
        symbols,
    };
    write_json(&layout.ingest_manifest(), &manifest)?;
    Ok(manifest)
}
