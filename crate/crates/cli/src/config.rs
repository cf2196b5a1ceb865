//! Run configuration: a JSON file, overridable from the command line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wismc::estimation::{FollowerIndexAt, DEFAULT_MIN_COUNT};
use wismc::index_process::DEFAULT_TRUNCATION_EPS;

use crate::error::{CliError, CliResult};

/// A single decay factor or a grid to select from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Single(f64),
    Grid(Vec<f64>),
}

impl LambdaChoice {
    pub fn values(&self) -> Vec<f64> {
        match self {
            LambdaChoice::Single(l) => vec![*l],
            LambdaChoice::Grid(g) => g.clone(),
        }
    }
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Single(0.97)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolInput {
    pub name: String,
    /// Tick CSV with a `timestamp,price` header.
    pub ticks: PathBuf,
    /// Overrides the run-wide `lambda`.
    #[serde(default)]
    pub lambda: Option<LambdaChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub leader: String,
    pub follower: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub symbols: Vec<SymbolInput>,
    #[serde(default = "defaults::interval_secs")]
    pub interval_secs: u32,
    /// Number of return states; odd.
    #[serde(default = "defaults::states")]
    pub states: usize,
    /// Share of the sample in the center return bin.
    #[serde(default = "defaults::center_mass")]
    pub center_mass: f64,
    #[serde(default = "defaults::index_levels")]
    pub index_levels: usize,
    #[serde(default)]
    pub lambda: LambdaChoice,
    #[serde(default = "defaults::truncation_eps")]
    pub truncation_eps: f64,
    #[serde(default = "defaults::t_max")]
    pub t_max: usize,
    #[serde(default = "defaults::min_count")]
    pub min_count: u64,
    #[serde(default)]
    pub follower_index_at: FollowerIndexAt,
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    /// Synthetic length in minutes; defaults to the estimation sample.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::replications")]
    pub replications: usize,
    /// Minutes discarded before each synthetic series; defaults to
    /// `10 / (1 - lambda)` for the slowest selected lambda.
    #[serde(default)]
    pub warmup: Option<usize>,
    #[serde(default = "defaults::max_lag")]
    pub max_lag: usize,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn interval_secs() -> u32 {
        60
    }
    pub fn states() -> usize {
        5
    }
    pub fn center_mass() -> f64 {
        0.25
    }
    pub fn index_levels() -> usize {
        5
    }
    pub fn truncation_eps() -> f64 {
        super::DEFAULT_TRUNCATION_EPS
    }
    pub fn t_max() -> usize {
        1000
    }
    pub fn min_count() -> u64 {
        super::DEFAULT_MIN_COUNT
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn replications() -> usize {
        1
    }
    pub fn max_lag() -> usize {
        100
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

/// The fields that define the estimated models. Seeds, horizons and output
/// locations are left out so a model can be re-simulated freely.
#[derive(Serialize)]
struct ModelKey<'a> {
    symbols: Vec<(&'a str, Vec<f64>)>,
    interval_secs: u32,
    states: usize,
    center_mass: f64,
    index_levels: usize,
    truncation_eps: f64,
    t_max: usize,
    min_count: u64,
    follower_index_at: FollowerIndexAt,
    pairs: &'a [PairSpec],
}

/// The fields that define the ingested data.
#[derive(Serialize)]
struct DataKey<'a> {
    symbols: Vec<(&'a str, &'a Path)>,
    interval_secs: u32,
}

fn sha256_hex(value: &impl Serialize) -> String {
    let json = serde_json::to_vec(value).expect("config keys serialize");
    format!("{:x}", Sha256::digest(json))
}

impl RunConfig {
    /// Reads a config file; relative tick paths resolve against its
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.symbols {
            if s.ticks.is_relative() {
                s.ticks = base.join(&s.ticks);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.symbols.is_empty() {
            return bad("no symbols configured".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.symbols {
            let ok = !s.name.is_empty()
                && !s.name.starts_with('.')
                && s.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
            if !ok {
                return bad(format!("symbol name {:?} must be alphanumeric (with _ - .)", s.name));
            }
            if !names.insert(s.name.as_str()) {
                return bad(format!("symbol {} listed twice", s.name));
            }
            for l in self.lambdas_for(&s.name) {
                if !(l > 0.0 && l <= 1.0) {
                    return bad(format!("lambda {l} for {} outside (0, 1]", s.name));
                }
            }
            if self.lambdas_for(&s.name).is_empty() {
                return bad(format!("empty lambda grid for {}", s.name));
            }
        }
        if self.states < 3 || self.states.is_multiple_of(2) {
            return bad(format!("states must be odd and at least 3, got {}", self.states));
        }
        if !(self.center_mass > 0.0 && self.center_mass < 1.0) {
            return bad(format!("center_mass must lie in (0, 1), got {}", self.center_mass));
        }
        if self.interval_secs == 0 || self.index_levels == 0 || self.t_max == 0 {
            return bad("interval_secs, index_levels and t_max must be positive".into());
        }
        if self.replications == 0 || self.max_lag == 0 || self.horizon == Some(0) {
            return bad("replications, max_lag and horizon must be positive".into());
        }
        if !(0.0..1.0).contains(&self.truncation_eps) {
            return bad(format!("truncation_eps must lie in [0, 1), got {}", self.truncation_eps));
        }
        let mut followers = BTreeSet::new();
        for p in &self.pairs {
            for name in [&p.leader, &p.follower] {
                if !names.contains(name.as_str()) {
                    return bad(format!("pair names unknown symbol {name}"));
                }
            }
            if p.leader == p.follower {
                return bad(format!("{} cannot follow itself", p.leader));
            }
            if !followers.insert(p.follower.as_str()) {
                return bad(format!("{} follows more than one leader", p.follower));
            }
        }
        if let Some(p) = self.pairs.iter().find(|p| followers.contains(p.leader.as_str())) {
            return bad(format!("{} is a follower and cannot also lead", p.leader));
        }
        Ok(())
    }

    pub fn lambdas_for(&self, symbol: &str) -> Vec<f64> {
        self.symbols
            .iter()
            .find(|s| s.name == symbol)
            .and_then(|s| s.lambda.as_ref())
            .unwrap_or(&self.lambda)
            .values()
    }

    pub fn symbol_names(&self) -> Vec<String> {
        self.symbols.iter().map(|s| s.name.clone()).collect()
    }

    pub fn leader_of(&self, follower: &str) -> Option<&str> {
        self.pairs.iter().find(|p| p.follower == follower).map(|p| p.leader.as_str())
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(&ModelKey {
            symbols: self.symbols.iter().map(|s| (s.name.as_str(), self.lambdas_for(&s.name))).collect(),
            interval_secs: self.interval_secs,
            states: self.states,
            center_mass: self.center_mass,
            index_levels: self.index_levels,
            truncation_eps: self.truncation_eps,
            t_max: self.t_max,
            min_count: self.min_count,
            follower_index_at: self.follower_index_at,
            pairs: &self.pairs,
        })
    }

    pub fn data_hash(&self) -> String {
        sha256_hex(&DataKey {
            symbols: self.symbols.iter().map(|s| (s.name.as_str(), s.ticks.as_path())).collect(),
            interval_secs: self.interval_secs,
        })
    }
}
