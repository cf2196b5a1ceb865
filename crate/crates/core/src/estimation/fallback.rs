use serde::{Deserialize, Serialize};

use super::follower::{FollowerContext, FollowerKernel};
use crate::error::{Error, Result};
use crate::market_data::Sign;
use crate::semimarkov::{BackwardState, IndexedKernel, OneStepDist};

pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Context pooling used to answer a one-step query, coarsest last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackTier {
    Exact = 0,
    PooledSign = 1,
    PooledLevel = 2,
    PooledBackwardTime = 3,
    Global = 4,
}

impl FallbackTier {
    pub const ALL: [FallbackTier; 5] = [
        FallbackTier::Exact,
        FallbackTier::PooledSign,
        FallbackTier::PooledLevel,
        FallbackTier::PooledBackwardTime,
        FallbackTier::Global,
    ];
}

/// How often each tier answered a query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierStats {
    pub counts: [u64; 5],
}

impl TierStats {
    pub fn record(&mut self, tier: FallbackTier) {
        self.counts[tier as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &TierStats) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }
}

/// Weighted one-step masses: stay and per-destination change weights.
#[derive(Debug, Clone)]
struct Weights {
    stay: f64,
    change: Vec<f64>,
}

impl Weights {
    fn zero(s: usize) -> Self {
        Self {
            stay: 0.0,
            change: vec![0.0; s],
        }
    }

    fn add(&mut self, w: f64, d: &OneStepDist) {
        self.stay += w * d.stay_prob;
        for (a, b) in self.change.iter_mut().zip(&d.change_probs) {
            *a += w * b;
        }
    }

    fn normalized(&self) -> Option<OneStepDist> {
        let total = self.stay + self.change.iter().sum::<f64>();
        (total > 0.0).then(|| OneStepDist {
            stay_prob: self.stay / total,
            change_probs: self.change.iter().map(|x| x / total).collect(),
        })
    }
}

/// Sojourn hazard and destination mix pooled over backward time.
#[derive(Debug, Clone)]
struct HazardPool {
    sojourns: f64,
    minutes: f64,
    destinations: Vec<f64>,
}

impl HazardPool {
    fn zero(s: usize) -> Self {
        Self {
            sojourns: 0.0,
            minutes: 0.0,
            destinations: vec![0.0; s],
        }
    }

    fn add(&mut self, other: &HazardPool) {
        self.sojourns += other.sojourns;
        self.minutes += other.minutes;
        for (a, b) in self.destinations.iter_mut().zip(&other.destinations) {
            *a += b;
        }
    }

    /// Geometric one-step law from state `i`: leave with the pooled hazard,
    /// to destinations in proportion to the pooled mix with `i` removed.
    fn law(&self, i: usize, force_change: bool) -> Option<OneStepDist> {
        if self.sojourns <= 0.0 || self.minutes <= 0.0 {
            return None;
        }
        let s = self.destinations.len();
        let hazard = if force_change {
            1.0
        } else {
            (self.sojourns / self.minutes).clamp(0.0, 1.0)
        };
        let mass: f64 = (0..s).filter(|&j| j != i).map(|j| self.destinations[j]).sum();
        let change_probs = (0..s)
            .map(|j| {
                if j == i {
                    0.0
                } else if mass > 0.0 {
                    hazard * self.destinations[j] / mass
                } else {
                    hazard / (s - 1) as f64
                }
            })
            .collect();
        Some(OneStepDist {
            stay_prob: 1.0 - hazard,
            change_probs,
        })
    }
}

/// Precomputed pools for answering kernel queries below the exact tier.
#[derive(Debug, Clone)]
pub struct KernelFallback {
    min_count: u64,
    per_state: Vec<HazardPool>,
    global: HazardPool,
}

impl KernelFallback {
    pub fn new(kernel: &IndexedKernel, min_count: u64) -> Self {
        let s = kernel.n_states();
        let t_max = kernel.t_max();
        let mut per_state = vec![HazardPool::zero(s); s];
        for (i, pool) in per_state.iter_mut().enumerate() {
            for v in 0..kernel.levels() {
                let n = kernel.support(i, v) as f64;
                if n == 0.0 {
                    continue;
                }
                // Expected sojourn length is the sum of the survival function.
                let mean_len: f64 = (0..t_max).map(|u| kernel.survival(i, v, u)).sum();
                pool.sojourns += n;
                pool.minutes += n * mean_len;
                for (j, d) in pool.destinations.iter_mut().enumerate() {
                    *d += n * kernel.cumulative(i, v, j, t_max);
                }
            }
        }
        let mut global = HazardPool::zero(s);
        per_state.iter().for_each(|p| global.add(p));
        Self {
            min_count,
            per_state,
            global,
        }
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// One-step law at `b` from the finest tier with enough support.
    pub fn query(&self, kernel: &IndexedKernel, b: &BackwardState) -> Result<(OneStepDist, FallbackTier)> {
        let BackwardState { i, u, v } = *b;
        let t_max = kernel.t_max();
        if i >= kernel.n_states() || v >= kernel.levels() || u >= t_max {
            return Err(Error::InvalidParameter(format!(
                "backward state (i={i}, u={u}, v={v}) outside kernel dimensions"
            )));
        }
        let enough = |at_risk: f64| at_risk >= self.min_count as f64 - 1e-6;

        let exact_risk = kernel.support(i, v) as f64 * kernel.survival(i, v, u);
        if exact_risk > 0.0 && enough(exact_risk) {
            return Ok((kernel.one_step_probs(b)?, FallbackTier::Exact));
        }

        let mut pooled = Weights::zero(kernel.n_states());
        let mut pooled_risk = 0.0;
        for w in 0..kernel.levels() {
            let risk = kernel.support(i, w) as f64 * kernel.survival(i, w, u);
            if risk > 0.0 {
                pooled.add(risk, &kernel.one_step_probs(&BackwardState { i, u, v: w })?);
                pooled_risk += risk;
            }
        }
        if enough(pooled_risk) {
            if let Some(d) = pooled.normalized() {
                return Ok((d, FallbackTier::PooledLevel));
            }
        }

        let force_change = u + 1 >= t_max;
        let state_pool = &self.per_state[i];
        if enough(state_pool.sojourns) {
            if let Some(d) = state_pool.law(i, force_change) {
                return Ok((d, FallbackTier::PooledBackwardTime));
            }
        }
        self.global
            .law(i, force_change)
            .map(|d| (d, FallbackTier::Global))
            .ok_or_else(|| Error::InsufficientData("kernel has no observed sojourns".into()))
    }
}

/// One-shot kernel query; builds the pools on every call.
pub fn query_with_fallback(
    kernel: &IndexedKernel,
    b: &BackwardState,
    min_count: u64,
) -> Result<(OneStepDist, FallbackTier)> {
    KernelFallback::new(kernel, min_count).query(kernel, b)
}

/// Pooled follower rows at every coarser tier, keyed densely.
#[derive(Debug, Clone)]
pub struct FollowerFallback {
    s: usize,
    levels: usize,
    t_max: usize,
    min_count: u64,
    /// `(i, u, v)`, pooled over sign.
    by_level: Vec<(f64, Weights)>,
    /// `(i, u)`, pooled over sign and level.
    by_time: Vec<(f64, Weights)>,
    /// `i`, pooled over everything else.
    by_state: Vec<(f64, Weights)>,
    global: (f64, Weights),
}

impl FollowerFallback {
    pub fn new(kernel: &FollowerKernel, min_count: u64) -> Self {
        let (s, levels, t_max) = (kernel.n_states(), kernel.levels(), kernel.t_max());
        let empty = || (0.0, Weights::zero(s));
        let mut by_level = vec![empty(); s * t_max * levels];
        let mut by_time = vec![empty(); s * t_max];
        let mut by_state = vec![empty(); s];
        let mut global = empty();
        for (ctx, row) in kernel.rows() {
            let n = row.support as f64;
            for slot in [
                &mut by_level[(ctx.i * t_max + ctx.u) * levels + ctx.v],
                &mut by_time[ctx.i * t_max + ctx.u],
                &mut by_state[ctx.i],
                &mut global,
            ] {
                slot.0 += n;
                slot.1.add(n, &row.probs);
            }
        }
        Self {
            s,
            levels,
            t_max,
            min_count,
            by_level,
            by_time,
            by_state,
            global,
        }
    }

    pub fn query(&self, kernel: &FollowerKernel, ctx: &FollowerContext) -> Result<(OneStepDist, FallbackTier)> {
        if ctx.i >= self.s || ctx.v >= self.levels {
            return Err(Error::InvalidParameter(format!("follower context {ctx:?} outside dimensions")));
        }
        let ctx = FollowerContext {
            u: ctx.u.min(self.t_max - 1),
            ..*ctx
        };
        let min = self.min_count;
        if let Some(row) = kernel.get(&ctx) {
            if row.support >= min {
                return Ok((row.probs.clone(), FallbackTier::Exact));
            }
        }
        let pick = |slot: &(f64, Weights)| {
            (slot.0 >= min as f64).then(|| slot.1.normalized()).flatten()
        };
        let (i, u, v) = (ctx.i, ctx.u, ctx.v);
        if let Some(d) = pick(&self.by_level[(i * self.t_max + u) * self.levels + v]) {
            return Ok((d, FallbackTier::PooledSign));
        }
        if let Some(d) = pick(&self.by_time[i * self.t_max + u]) {
            return Ok((d, FallbackTier::PooledLevel));
        }
        if let Some(d) = pick(&self.by_state[i]) {
            return Ok((d, FallbackTier::PooledBackwardTime));
        }
        // Global: stay share and destination mix over all rows, with the
        // query state's own destination removed.
        let (n, w) = &self.global;
        if *n <= 0.0 {
            return Err(Error::InsufficientData("follower model has no observed contexts".into()));
        }
        let mut change = w.change.clone();
        change[i] = 0.0;
        let mut stay = w.stay;
        if change.iter().all(|&x| x == 0.0) {
            stay = 1.0;
        }
        let d = Weights { stay, change }
            .normalized()
            .ok_or_else(|| Error::InsufficientData("follower model has no mass".into()))?;
        Ok((d, FallbackTier::Global))
    }
}

/// One-shot follower query; builds the pools on every call.
pub fn query_follower_with_fallback(
    kernel: &FollowerKernel,
    ctx: &FollowerContext,
    min_count: u64,
) -> Result<(OneStepDist, FallbackTier)> {
    FollowerFallback::new(kernel, min_count).query(kernel, ctx)
}

/// Whether any leader sign changes the follower's law at this context.
pub fn sign_sensitive(kernel: &FollowerKernel, i: usize, u: usize, v: usize) -> bool {
    let rows: Vec<_> = Sign::ALL
        .iter()
        .filter_map(|&sign| kernel.get(&FollowerContext { i, u, v, sign }))
        .collect();
    rows.windows(2).any(|w| w[0].probs.tv_distance(&w[1].probs) > 0.0)
}
