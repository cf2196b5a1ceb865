use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wismc::artifact::{
    read_returns_csv, write_follower_artifact, write_kernel_artifact, ArtifactMeta, FollowerArtifact, KernelArtifact,
};
use wismc::estimation::{
    estimate_follower, estimate_kernel, FollowerContext, FollowerFallback, FollowerKernel, KernelFallback, TierStats,
};
use wismc::index_process::{fit_index_bins, IndexBins, IndexPath, IndexSpec};
use wismc::market_data::{discretize, fit_return_bins_with, BinSpec, ReturnSeries, Sign, StatePath};
use wismc::semimarkov::{BackwardState, IndexedKernel};
use wismc::simulation::{paths_to_returns, simulate_stepwise, Model, SimConfig};
use wismc::statistics::{acf_distance, acf_squared};

use super::{IngestManifest, Options};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::layout::{open, read_json, write_file, write_json, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCandidate {
    pub lambda: f64,
    /// L2 distance between real and synthetic squared-return ACFs over
    /// lags `1..=max_lag`; absent when there is nothing to select.
    pub acf_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolReport {
    pub symbol: String,
    pub lambda: f64,
    pub sample_len: usize,
    pub transitions: usize,
    /// Tier answering each reachable `(i, u, v)`, exact first.
    pub tiers: TierStats,
    pub candidates: Vec<LambdaCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerReport {
    pub symbol: String,
    pub leader: String,
    pub contexts: usize,
    pub tiers: TierStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub config_hash: String,
    pub symbols: Vec<SymbolReport>,
    pub followers: Vec<FollowerReport>,
}

struct SymbolData {
    name: String,
    returns: ReturnSeries,
    bins: BinSpec,
    path: StatePath,
}

struct Candidate {
    spec: IndexSpec,
    index: IndexPath,
    index_bins: IndexBins,
    kernel: IndexedKernel,
    distance: Option<f64>,
}

fn load_symbol(cfg: &RunConfig, layout: &Layout, name: &str) -> CliResult<SymbolData> {
    let file = layout.returns(name);
    let returns = read_returns_csv(open(&file)?).context(|| file.display().to_string())?;
    let bins = fit_return_bins_with(&returns, cfg.states, cfg.center_mass).context(|| format!("return bins of {name}"))?;
    let path = discretize(&returns, &bins).context(|| format!("discretizing {name}"))?;
    Ok(SymbolData {
        name: name.to_string(),
        returns,
        bins,
        path,
    })
}

fn fit_candidate(cfg: &RunConfig, data: &SymbolData, lambda: f64, select: bool, stream: u64) -> CliResult<Candidate> {
    let name = &data.name;
    let spec = IndexSpec::new(lambda, data.bins.squared_representatives())
        .and_then(|s| s.with_truncation(cfg.truncation_eps))
        .context(|| format!("index of {name}"))?;
    let index = IndexPath::compute(&data.path, &spec);
    let index_bins =
        fit_index_bins(&index.at_transitions, cfg.index_levels).context(|| format!("index levels of {name} at lambda {lambda}"))?;
    let kernel = estimate_kernel(&data.path, &index, &index_bins, cfg.t_max)
        .context(|| format!("kernel of {name} at lambda {lambda}"))?;

    let distance = if select {
        let model = Model {
            kernel: &kernel,
            index: &spec,
            bins: &index_bins,
        };
        let warmup = spec.warmup_minutes();
        let mut sim = SimConfig::new(data.returns.len() + warmup, cfg.seed).with_stream(stream);
        sim.min_count = cfg.min_count;
        let path = simulate_stepwise(&model, &sim)
            .and_then(|p| p.skip_minutes(warmup))
            .context(|| format!("selection run of {name} at lambda {lambda}"))?;
        let synth = paths_to_returns(&path, &data.bins).context(|| name.clone())?;
        let real_acf = acf_squared(&data.returns, cfg.max_lag).context(|| format!("ACF of {name}"))?;
        let synth_acf = acf_squared(&synth, cfg.max_lag).context(|| format!("synthetic ACF of {name}"))?;
        Some(acf_distance(&real_acf, &synth_acf, cfg.max_lag).context(|| name.clone())?)
    } else {
        None
    };
    Ok(Candidate {
        spec,
        index,
        index_bins,
        kernel,
        distance,
    })
}

fn kernel_tiers(kernel: &IndexedKernel, min_count: u64) -> TierStats {
    let fallback = KernelFallback::new(kernel, min_count);
    let mut stats = TierStats::default();
    for i in 0..kernel.n_states() {
        for v in 0..kernel.levels() {
            for u in 0..kernel.t_max() {
                if let Ok((_, tier)) = fallback.query(kernel, &BackwardState { i, u, v }) {
                    stats.record(tier);
                }
            }
        }
    }
    stats
}

fn follower_tiers(kernel: &FollowerKernel, min_count: u64) -> TierStats {
    let fallback = FollowerFallback::new(kernel, min_count);
    let mut stats = TierStats::default();
    for i in 0..kernel.n_states() {
        for v in 0..kernel.levels() {
            for u in 0..kernel.t_max() {
                for sign in Sign::ALL {
                    if let Ok((_, tier)) = fallback.query(kernel, &FollowerContext { i, u, v, sign }) {
                        stats.record(tier);
                    }
                }
            }
        }
    }
    stats
}

fn write_kernel(path: &std::path::Path, artifact: &KernelArtifact) -> CliResult<()> {
    write_file(path, |w| write_kernel_artifact(w, artifact).context(|| path.display().to_string()))
}

/// Estimates a kernel per symbol (choosing lambda on a grid when one is
/// given) and a follower kernel per configured pair.
pub fn estimate(cfg: &RunConfig, opts: &Options) -> CliResult<EstimateReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let manifest: IngestManifest = read_json(&layout.ingest_manifest())?;
    opts.check_hash("ingested data", &manifest.data_hash, &cfg.data_hash())?;
    let config_hash = cfg.config_hash();
    let pool = opts.pool()?;
    let names = cfg.symbol_names();

    let data: Vec<SymbolData> =
        pool.install(|| names.par_iter().map(|n| load_symbol(cfg, &layout, n)).collect::<CliResult<_>>())?;

    let jobs: Vec<(usize, f64, bool)> = names
        .iter()
        .enumerate()
        .flat_map(|(k, n)| {
            let grid = cfg.lambdas_for(n);
            let select = grid.len() > 1;
            grid.into_iter().map(move |l| (k, l, select))
        })
        .collect();
    let fitted: Vec<Candidate> = pool.install(|| {
        jobs.par_iter()
            .map(|&(k, lambda, select)| fit_candidate(cfg, &data[k], lambda, select, k as u64))
            .collect::<CliResult<_>>()
    })?;

    let mut chosen: Vec<Option<Candidate>> = (0..names.len()).map(|_| None).collect();
    let mut reports = Vec::with_capacity(names.len());
    let mut per_symbol: Vec<Vec<Candidate>> = (0..names.len()).map(|_| Vec::new()).collect();
    for (&(k, _, _), c) in jobs.iter().zip(fitted) {
        per_symbol[k].push(c);
    }
    for (k, candidates) in per_symbol.into_iter().enumerate() {
        let d = &data[k];
        let meta = ArtifactMeta {
            symbol: d.name.clone(),
            config_hash: config_hash.clone(),
            sample_len: d.returns.len(),
        };
        let select = candidates.len() > 1;
        let mut summary = Vec::with_capacity(candidates.len());
        let mut best = 0;
        for (n, c) in candidates.iter().enumerate() {
            summary.push(LambdaCandidate {
                lambda: c.spec.lambda,
                acf_distance: c.distance,
            });
            if c.distance.unwrap_or(0.0) < candidates[best].distance.unwrap_or(0.0) {
                best = n;
            }
        }
        let mut artifacts = Vec::with_capacity(candidates.len());
        for c in candidates {
            let artifact = KernelArtifact {
                meta: meta.clone(),
                bins: d.bins.clone(),
                index: c.spec.clone(),
                index_bins: c.index_bins.clone(),
                kernel: c.kernel.clone(),
            };
            if select {
                write_kernel(&layout.kernel_candidate(&d.name, c.spec.lambda), &artifact)?;
            }
            artifacts.push((artifact, c));
        }
        if select {
            let file = layout.lambda_selection(&d.name);
            write_file(&file, |w| {
                let mut wr = csv::Writer::from_writer(w);
                let io = |e: csv::Error| CliError::io(&file, std::io::Error::other(e));
                wr.write_record(["lambda", "acf_l2_distance", "selected"]).map_err(io)?;
                for (n, s) in summary.iter().enumerate() {
                    wr.write_record([
                        s.lambda.to_string(),
                        s.acf_distance.map_or(String::new(), |x| x.to_string()),
                        (n == best).to_string(),
                    ])
                    .map_err(io)?;
                }
                wr.flush().map_err(|e| CliError::io(&file, e))
            })?;
        }
        let (artifact, candidate) = artifacts.swap_remove(best);
        write_kernel(&layout.kernel(&d.name), &artifact)?;

        let tiers = kernel_tiers(&candidate.kernel, cfg.min_count);
        let transitions = d.path.transitions().len();
        log::info!(
            "{}: lambda {}, {} transitions, fallback tiers {:?}",
            d.name,
            candidate.spec.lambda,
            transitions,
            tiers.counts
        );
        reports.push(SymbolReport {
            symbol: d.name.clone(),
            lambda: candidate.spec.lambda,
            sample_len: d.returns.len(),
            transitions,
            tiers,
            candidates: summary,
        });
        chosen[k] = Some(candidate);
    }

    let mut followers = Vec::new();
    for pair in &cfg.pairs {
        let li = names.iter().position(|n| *n == pair.leader).expect("validated");
        let fi = names.iter().position(|n| *n == pair.follower).expect("validated");
        let fc = chosen[fi].as_ref().expect("every symbol estimated");
        let kernel = estimate_follower(
            &data[li].path,
            &data[fi].path,
            &fc.index,
            &fc.index_bins,
            cfg.t_max,
            cfg.follower_index_at,
        )
        .context(|| format!("follower {} of {}", pair.follower, pair.leader))?;
        let tiers = follower_tiers(&kernel, cfg.min_count);
        log::info!(
            "{} follows {}: {} contexts, fallback tiers {:?}",
            pair.follower,
            pair.leader,
            kernel.rows().len(),
            tiers.counts
        );
        followers.push(FollowerReport {
            symbol: pair.follower.clone(),
            leader: pair.leader.clone(),
            contexts: kernel.rows().len(),
            tiers,
        });
        let artifact = FollowerArtifact {
            meta: ArtifactMeta {
                symbol: pair.follower.clone(),
                config_hash: config_hash.clone(),
                sample_len: data[fi].returns.len(),
            },
            leader_symbol: pair.leader.clone(),
            bins: data[fi].bins.clone(),
            index: fc.spec.clone(),
            index_bins: fc.index_bins.clone(),
            kernel,
        };
        let file = layout.follower(&pair.follower);
        write_file(&file, |w| write_follower_artifact(w, &artifact).context(|| file.display().to_string()))?;
    }

    let report = EstimateReport {
        config_hash,
        symbols: reports,
        followers,
    };
    write_json(&layout.estimate_report(), &report)?;
    Ok(report)
}
