//! Monte Carlo generation of univariate and leader/follower paths.
//!
//! Every path draws from its own ChaCha20 stream, selected by `(seed,
//! stream)`. A leader simulated alongside a follower consumes exactly the
//! draws it would consume alone, so its path is identical to the univariate
//! stepwise path with the same configuration.

use log::info;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    FallbackTier, FollowerContext, FollowerFallback, FollowerIndexAt, FollowerKernel, KernelFallback, TierStats,
    DEFAULT_MIN_COUNT,
};
use crate::index_process::{IndexBins, IndexSpec, IndexTracker};
use crate::market_data::{BinSpec, ReturnSeries, Sign, StatePath};
use crate::semimarkov::{BackwardState, IndexedKernel, Step};

/// Name recorded in run manifests.
pub const RNG_NAME: &str = "chacha20";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub seed: u64,
    /// Independent stream of the same seed.
    #[serde(default)]
    pub stream: u64,
    /// Defaults to the center state.
    #[serde(default)]
    pub initial_state: Option<usize>,
    /// Defaults to the spec's `u0`.
    #[serde(default)]
    pub initial_index: Option<f64>,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    /// Log progress every this many minutes.
    #[serde(default)]
    pub report_every: Option<usize>,
}

fn default_min_count() -> u64 {
    DEFAULT_MIN_COUNT
}

impl SimConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            seed,
            stream: 0,
            initial_state: None,
            initial_index: None,
            min_count: DEFAULT_MIN_COUNT,
            report_every: None,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    fn validate(&self, n_states: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if let Some(k) = self.initial_state {
            if k >= n_states {
                return Err(Error::InvalidParameter(format!("initial state {k} out of range")));
            }
        }
        if let Some(u) = self.initial_index {
            if !u.is_finite() {
                return Err(Error::InvalidParameter("initial index must be finite".into()));
            }
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha20Rng {
        stream_rng(self.seed, self.stream)
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A kernel together with the index it is conditioned on.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub kernel: &'a IndexedKernel,
    pub index: &'a IndexSpec,
    pub bins: &'a IndexBins,
}

#[derive(Debug, Clone, Copy)]
pub struct FollowerModel<'a> {
    pub kernel: &'a FollowerKernel,
    pub index: &'a IndexSpec,
    pub bins: &'a IndexBins,
}

fn check_model(m: &Model) -> Result<()> {
    m.index.validate()?;
    if m.index.n_states() != m.kernel.n_states() {
        return Err(Error::InvalidParameter(format!(
            "index spec has {} states, kernel {}",
            m.index.n_states(),
            m.kernel.n_states()
        )));
    }
    if m.bins.levels() != m.kernel.levels() {
        return Err(Error::InvalidParameter(format!(
            "index bins have {} levels, kernel {}",
            m.bins.levels(),
            m.kernel.levels()
        )));
    }
    Ok(())
}

fn tracker_for(spec: &IndexSpec, initial_index: Option<f64>) -> IndexTracker {
    match initial_index {
        Some(u0) => IndexTracker::new(&IndexSpec { u0, ..spec.clone() }),
        None => IndexTracker::new(spec),
    }
}

/// A simulated path with the index at each transition and the fallback
/// tiers used along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub path: StatePath,
    pub index_at_transitions: Vec<f64>,
    pub tiers: TierStats,
}

/// Whole-sojourn sampling: draws `(next state, sojourn)` from the kernel row
/// of the current state and index level.
///
/// Rows with fewer than `min_count` sojourns are walked minute by minute
/// through the fallback tiers instead.
pub fn simulate_event(model: &Model, cfg: &SimConfig) -> Result<StatePath> {
    Ok(simulate_event_traced(model, cfg)?.path)
}

pub fn simulate_event_traced(model: &Model, cfg: &SimConfig) -> Result<SimTrace> {
    check_model(model)?;
    let kernel = model.kernel;
    cfg.validate(kernel.n_states())?;
    let fallback = KernelFallback::new(kernel, cfg.min_count);
    let mut rng = cfg.rng();
    let mut tracker = tracker_for(model.index, cfg.initial_index);
    let mut tiers = TierStats::default();
    let mut states = Vec::with_capacity(cfg.horizon);
    let mut index_at_transitions = Vec::new();
    let mut i = cfg.initial_state.unwrap_or(kernel.n_states() / 2);
    let mut next_report = cfg.report_every;

    while states.len() < cfg.horizon {
        let u_n = tracker.value();
        index_at_transitions.push(u_n);
        let v = model.bins.level_of(u_n);
        let outcome = if kernel.support(i, v) >= cfg.min_count {
            tiers.record(FallbackTier::Exact);
            kernel.sample_outcome(i, v, rng.gen::<f64>())
        } else {
            None
        };
        let (j, sojourn) = match outcome {
            Some(o) => o,
            None => walk_sojourn(kernel, &fallback, i, v, &mut rng, &mut tiers)?,
        };
        let stop = (cfg.horizon - states.len()).min(sojourn);
        for _ in 0..stop {
            states.push(i);
            tracker.push(i);
        }
        if let (Some(stride), Some(at)) = (cfg.report_every, next_report) {
            if states.len() >= at {
                info!("simulated {} / {} minutes", states.len(), cfg.horizon);
                next_report = Some(at + stride.max(1));
            }
        }
        i = j;
    }
    Ok(SimTrace {
        path: StatePath::from_states(states, kernel.n_states())?,
        index_at_transitions,
        tiers,
    })
}

/// Draws one sojourn minute by minute through the fallback tiers.
fn walk_sojourn(
    kernel: &IndexedKernel,
    fallback: &KernelFallback,
    i: usize,
    v: usize,
    rng: &mut ChaCha20Rng,
    tiers: &mut TierStats,
) -> Result<(usize, usize)> {
    for u in 0..kernel.t_max() {
        let (dist, tier) = fallback.query(kernel, &BackwardState { i, u, v })?;
        tiers.record(tier);
        if let Step::Change(j) = dist.sample(rng.gen::<f64>()) {
            return Ok((j, u + 1));
        }
    }
    Err(Error::InvalidKernel(format!("state {i} never left within t_max")))
}

/// Minute-by-minute state of a stepwise sampler.
struct Walker<'a> {
    model: Model<'a>,
    fallback: KernelFallback,
    tracker: IndexTracker,
    rng: ChaCha20Rng,
    i: usize,
    u: usize,
    v: usize,
    tiers: TierStats,
}

impl<'a> Walker<'a> {
    fn new(model: Model<'a>, cfg: &SimConfig) -> Result<Self> {
        check_model(&model)?;
        cfg.validate(model.kernel.n_states())?;
        let tracker = tracker_for(model.index, cfg.initial_index);
        let v = model.bins.level_of(tracker.value());
        Ok(Self {
            fallback: KernelFallback::new(model.kernel, cfg.min_count),
            tracker,
            rng: cfg.rng(),
            i: cfg.initial_state.unwrap_or(model.kernel.n_states() / 2),
            u: 0,
            v,
            tiers: TierStats::default(),
            model,
        })
    }

    /// Commits the current minute's state to the index and draws the next
    /// minute. Returns whether a transition happened.
    fn advance(&mut self) -> Result<bool> {
        self.tracker.push(self.i);
        let b = BackwardState {
            i: self.i,
            u: self.u,
            v: self.v,
        };
        let (dist, tier) = self.fallback.query(self.model.kernel, &b)?;
        self.tiers.record(tier);
        match dist.sample(self.rng.gen::<f64>()) {
            Step::Stay => {
                self.u += 1;
                Ok(false)
            }
            Step::Change(j) => {
                self.i = j;
                self.u = 0;
                self.v = self.model.bins.level_of(self.tracker.value());
                Ok(true)
            }
        }
    }
}

/// Minute-by-minute sampling from the one-step law of `(state, backward
/// time, index level)`.
pub fn simulate_stepwise(model: &Model, cfg: &SimConfig) -> Result<StatePath> {
    Ok(simulate_stepwise_traced(model, cfg)?.path)
}

pub fn simulate_stepwise_traced(model: &Model, cfg: &SimConfig) -> Result<SimTrace> {
    let mut w = Walker::new(*model, cfg)?;
    let mut states = Vec::with_capacity(cfg.horizon);
    let mut index_at_transitions = vec![w.tracker.value()];
    for t in 0..cfg.horizon {
        states.push(w.i);
        if t + 1 == cfg.horizon {
            break;
        }
        if w.advance()? {
            index_at_transitions.push(w.tracker.value());
        }
        if let Some(stride) = cfg.report_every {
            if stride > 0 && (t + 1) % stride == 0 {
                info!("simulated {} / {} minutes", t + 1, cfg.horizon);
            }
        }
    }
    Ok(SimTrace {
        path: StatePath::from_states(states, model.kernel.n_states())?,
        index_at_transitions,
        tiers: w.tiers,
    })
}

/// Leader and follower paths on the same minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePath {
    pub leader: StatePath,
    pub follower: StatePath,
    pub leader_tiers: TierStats,
    pub follower_tiers: TierStats,
}

/// Joint simulation: each minute the leader moves by its own one-step law,
/// then the follower moves by its law given the sign of the leader's new
/// state.
pub fn simulate_bivariate(
    leader: &Model,
    follower: &FollowerModel,
    leader_cfg: &SimConfig,
    follower_cfg: &SimConfig,
) -> Result<BivariatePath> {
    let fk = follower.kernel;
    follower.index.validate()?;
    if follower.index.n_states() != fk.n_states() || follower.bins.levels() != fk.levels() {
        return Err(Error::InvalidParameter("follower index does not match its kernel".into()));
    }
    follower_cfg.validate(fk.n_states())?;
    if leader_cfg.horizon != follower_cfg.horizon {
        return Err(Error::GridMismatch("leader and follower horizons differ".into()));
    }
    let horizon = leader_cfg.horizon;
    let n_leader = leader.kernel.n_states();
    let mut lw = Walker::new(*leader, leader_cfg)?;

    let fallback = FollowerFallback::new(fk, follower_cfg.min_count);
    let mut rng = follower_cfg.rng();
    let mut tracker = tracker_for(follower.index, follower_cfg.initial_index);
    let mut tiers = TierStats::default();
    let mut i = follower_cfg.initial_state.unwrap_or(fk.n_states() / 2);
    let mut u = 0usize;
    let mut v_transition = follower.bins.level_of(tracker.value());

    let mut leader_states = Vec::with_capacity(horizon);
    let mut follower_states = Vec::with_capacity(horizon);
    leader_states.push(lw.i);
    follower_states.push(i);
    for _ in 1..horizon {
        lw.advance()?;
        leader_states.push(lw.i);

        let v = match fk.index_at() {
            FollowerIndexAt::Transition => v_transition,
            FollowerIndexAt::Minute => follower.bins.level_of(tracker.value()),
        };
        tracker.push(i);
        let ctx = FollowerContext {
            i,
            u: fk.cap_u(u),
            v,
            sign: Sign::of_state(lw.i, n_leader),
        };
        let (dist, tier) = fallback.query(fk, &ctx)?;
        tiers.record(tier);
        match dist.sample(rng.gen::<f64>()) {
            Step::Stay => u += 1,
            Step::Change(j) => {
                i = j;
                u = 0;
                v_transition = follower.bins.level_of(tracker.value());
            }
        }
        follower_states.push(i);
    }
    Ok(BivariatePath {
        leader: StatePath::from_states(leader_states, n_leader)?,
        follower: StatePath::from_states(follower_states, fk.n_states())?,
        leader_tiers: lw.tiers,
        follower_tiers: tiers,
    })
}

/// Emits the representative return of each minute's state.
pub fn paths_to_returns(path: &StatePath, bins: &BinSpec) -> Result<ReturnSeries> {
    if path.n_states() != bins.n_states() {
        return Err(Error::InvalidParameter(format!(
            "path has {} states, bins {}",
            path.n_states(),
            bins.n_states()
        )));
    }
    let r = bins.representatives();
    Ok(ReturnSeries::new(path.states().iter().map(|&k| r[k]).collect()))
}
