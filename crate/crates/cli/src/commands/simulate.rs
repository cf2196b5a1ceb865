use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wismc::artifact::{read_follower_artifact, read_kernel_artifact, write_synthetic_csv, FollowerArtifact, KernelArtifact};
use wismc::estimation::TierStats;
use wismc::market_data::StatePath;
use wismc::simulation::{simulate_bivariate, simulate_stepwise_traced, FollowerModel, Model, SimConfig, RNG_NAME};

use super::Options;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::layout::{read_bytes, write_file, write_json, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSeries {
    pub replication: usize,
    pub symbol: String,
    pub stream: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<String>,
    /// Relative to the output directory.
    pub file: String,
    pub tiers: TierStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateManifest {
    pub config_hash: String,
    pub rng: String,
    pub seed: u64,
    pub horizon: usize,
    pub warmup: usize,
    pub replications: usize,
    pub min_count: u64,
    pub series: Vec<SyntheticSeries>,
}

fn model(a: &KernelArtifact) -> Model<'_> {
    Model {
        kernel: &a.kernel,
        index: &a.index,
        bins: &a.index_bins,
    }
}

/// Draws `replications` synthetic paths per symbol. Followers are driven by
/// their leader's path, which is identical to the leader's own series in
/// the same replication.
pub fn simulate(cfg: &RunConfig, opts: &Options) -> CliResult<SimulateManifest> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let config_hash = cfg.config_hash();
    let names = cfg.symbol_names();

    let mut kernels = Vec::with_capacity(names.len());
    for name in &names {
        let file = layout.kernel(name);
        let a = read_kernel_artifact(&read_bytes(&file)?).context(|| file.display().to_string())?;
        opts.check_hash(&file.display().to_string(), &a.meta.config_hash, &config_hash)?;
        kernels.push(a);
    }
    let mut followers: Vec<Option<(usize, FollowerArtifact)>> = (0..names.len()).map(|_| None).collect();
    for (k, name) in names.iter().enumerate() {
        let Some(leader) = cfg.leader_of(name) else { continue };
        let file = layout.follower(name);
        let a = read_follower_artifact(&read_bytes(&file)?).context(|| file.display().to_string())?;
        opts.check_hash(&file.display().to_string(), &a.meta.config_hash, &config_hash)?;
        if a.leader_symbol != leader {
            return Err(CliError::HashMismatch(format!(
                "{} was estimated against leader {}, configuration names {leader}",
                file.display(),
                a.leader_symbol
            )));
        }
        let li = names.iter().position(|n| n == leader).expect("validated");
        followers[k] = Some((li, a));
    }

    let horizon = cfg
        .horizon
        .unwrap_or_else(|| kernels.iter().map(|a| a.meta.sample_len).min().expect("at least one symbol"));
    let warmup = cfg
        .warmup
        .unwrap_or_else(|| kernels.iter().map(|a| a.index.warmup_minutes()).max().unwrap_or(0));
    let n = names.len() as u64;
    let sim_config = |rep: usize, k: usize| {
        let mut c = SimConfig::new(horizon + warmup, cfg.seed).with_stream(rep as u64 * n + k as u64);
        c.min_count = cfg.min_count;
        c
    };

    let tasks: Vec<(usize, usize)> = (0..cfg.replications).flat_map(|r| (0..names.len()).map(move |k| (r, k))).collect();
    let pool = opts.pool()?;
    let series: Vec<SyntheticSeries> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(rep, k)| {
                let name = &names[k];
                let cfg_k = sim_config(rep, k);
                let (path, tiers, leader): (StatePath, TierStats, Option<String>) = match &followers[k] {
                    None => {
                        let trace = simulate_stepwise_traced(&model(&kernels[k]), &cfg_k)
                            .context(|| format!("simulating {name}, replication {rep}"))?;
                        (trace.path, trace.tiers, None)
                    }
                    Some((li, f)) => {
                        let fm = FollowerModel {
                            kernel: &f.kernel,
                            index: &f.index,
                            bins: &f.index_bins,
                        };
                        let biv = simulate_bivariate(&model(&kernels[*li]), &fm, &sim_config(rep, *li), &cfg_k)
                            .context(|| format!("simulating {name} after {}, replication {rep}", names[*li]))?;
                        (biv.follower, biv.follower_tiers, Some(names[*li].clone()))
                    }
                };
                let path = path.skip_minutes(warmup).context(|| format!("warm-up of {name}"))?;
                let file = layout.synthetic(rep, name);
                let bins = &kernels[k].bins;
                write_file(&file, |w| write_synthetic_csv(w, &path, bins).context(|| file.display().to_string()))?;
                let relative = file.strip_prefix(layout.root()).unwrap_or(&file).to_string_lossy().replace('\\', "/");
                Ok(SyntheticSeries {
                    replication: rep,
                    symbol: name.clone(),
                    stream: cfg_k.stream,
                    leader,
                    file: relative,
                    tiers,
                })
            })
            .collect::<CliResult<_>>()
    })?;
    log::info!(
        "{} series of {horizon} minutes after {warmup} warm-up minutes",
        series.len()
    );

    let manifest = SimulateManifest {
        config_hash,
        rng: RNG_NAME.to_string(),
        seed: cfg.seed,
        horizon,
        warmup,
        replications: cfg.replications,
        min_count: cfg.min_count,
        series,
    };
    write_json(&layout.simulate_manifest(), &manifest)?;
    Ok(manifest)
}
