//! The weighted index process: an accumulated reward over the path history,
//! specialized to the normalized EWMA of squared representative returns.
//!
//! With minute states `z(a)` and a rate `f(state, elapsed)`, the index seen
//! at minute `t` is
//!
//! ```text
//! U(t) = sum_{a < t} f(z(a), t - a)
//! ```
//!
//! and the value at the n-th transition is `U_n = U(T_n)`. For the EWMA the
//! rate is `lambda^elapsed * r^2` divided by the total weight
//! `sum_{a < t} lambda^(t - a)`, so `U` is a convex combination of squared
//! returns. `U_0` (and `U(0)`, where the history is empty) is the configured
//! initial value.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::StatePath;
use crate::quantile::select_cuts;

pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-8;
pub const DEFAULT_INDEX_LEVELS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub lambda: f64,
    /// History terms whose weight `lambda^elapsed` falls below this are dropped.
    pub truncation_eps: f64,
    pub u0: f64,
    /// `r_k^2` for every state `k`.
    pub squared_representative: Vec<f64>,
}

impl IndexSpec {
    /// EWMA spec with the default truncation and `u0` set to the median of
    /// the squared representatives.
    pub fn new(lambda: f64, squared_representative: Vec<f64>) -> Result<Self> {
        let u0 = median(&squared_representative).unwrap_or(0.0);
        let spec = Self {
            lambda,
            truncation_eps: DEFAULT_TRUNCATION_EPS,
            u0,
            squared_representative,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_truncation(mut self, eps: f64) -> Result<Self> {
        self.truncation_eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_u0(mut self, u0: f64) -> Result<Self> {
        self.u0 = u0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(self.truncation_eps >= 0.0 && self.truncation_eps < 1.0) {
            return bad(format!("truncation_eps must lie in [0, 1), got {}", self.truncation_eps));
        }
        if self.truncation_eps > self.lambda {
            return bad("truncation_eps exceeds lambda: every history weight would be dropped".into());
        }
        if !self.u0.is_finite() {
            return bad("u0 must be finite".into());
        }
        if self.squared_representative.is_empty()
            || self.squared_representative.iter().any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return bad("squared representatives must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.squared_representative.len()
    }

    /// Largest elapsed time whose weight survives truncation; `None` when
    /// the whole history is kept.
    pub fn window(&self) -> Option<usize> {
        if self.lambda >= 1.0 || self.truncation_eps <= 0.0 {
            return None;
        }
        let mut w = (self.truncation_eps.ln() / self.lambda.ln()).floor().max(1.0) as usize;
        while w > 1 && self.lambda.powi(w as i32) < self.truncation_eps {
            w -= 1;
        }
        while self.lambda.powi(w as i32 + 1) >= self.truncation_eps {
            w += 1;
        }
        Some(w)
    }

    /// Truncated history weight `lambda^elapsed`.
    pub fn weight(&self, elapsed: usize) -> f64 {
        match self.window() {
            Some(w) if elapsed > w => 0.0,
            _ => self.lambda.powi(elapsed as i32),
        }
    }

    /// Minutes of simulated history to discard before statistics.
    pub fn warmup_minutes(&self) -> usize {
        if self.lambda >= 1.0 {
            0
        } else {
            (10.0 / (1.0 - self.lambda)).ceil() as usize
        }
    }
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Un-normalized EWMA rate `lambda^elapsed * r_state^2`.
pub fn ewma_f(state: usize, elapsed: usize, spec: &IndexSpec) -> f64 {
    spec.lambda.powi(elapsed as i32) * spec.squared_representative[state]
}

/// Reward rate `f(state, elapsed)` accumulated by an index process.
pub trait RewardRate {
    fn rate(&self, state: usize, elapsed: usize) -> f64;

    /// Elapsed time beyond which the rate is identically zero.
    fn memory(&self) -> Option<usize> {
        None
    }
}

/// Constant rate `c`, independent of state and elapsed time.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRate(pub f64);

impl RewardRate for ConstantRate {
    fn rate(&self, _state: usize, _elapsed: usize) -> f64 {
        self.0
    }
}

/// Truncated `lambda^elapsed`, tabulated once per spec.
#[derive(Debug, Clone)]
pub struct WeightTable {
    lambda: f64,
    window: Option<usize>,
    table: Vec<f64>,
}

impl WeightTable {
    const UNTRUNCATED_LEN: usize = 4096;

    pub fn new(spec: &IndexSpec) -> Self {
        let window = spec.window();
        let len = window.map_or(Self::UNTRUNCATED_LEN, |w| w + 1);
        let mut table = Vec::with_capacity(len);
        let mut w = 1.0;
        for _ in 0..len {
            table.push(w);
            w *= spec.lambda;
        }
        Self {
            lambda: spec.lambda,
            window,
            table,
        }
    }

    pub fn get(&self, elapsed: usize) -> f64 {
        match self.table.get(elapsed) {
            Some(&w) => w,
            None if self.window.is_some() => 0.0,
            None => self.lambda.powi(elapsed as i32),
        }
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }
}

/// Numerator of the normalized EWMA: truncated `lambda^e * r^2`.
pub struct EwmaNumerator<'a> {
    squared: &'a [f64],
    weights: WeightTable,
}

impl<'a> EwmaNumerator<'a> {
    pub fn new(spec: &'a IndexSpec) -> Self {
        Self {
            squared: &spec.squared_representative,
            weights: WeightTable::new(spec),
        }
    }
}

/// Denominator of the normalized EWMA: truncated `lambda^e`.
pub struct EwmaDenominator(WeightTable);

impl EwmaDenominator {
    pub fn new(spec: &IndexSpec) -> Self {
        Self(WeightTable::new(spec))
    }
}

impl RewardRate for EwmaNumerator<'_> {
    fn rate(&self, state: usize, elapsed: usize) -> f64 {
        self.weights.get(elapsed) * self.squared[state]
    }

    fn memory(&self) -> Option<usize> {
        self.weights.window()
    }
}

impl RewardRate for EwmaDenominator {
    fn rate(&self, _state: usize, elapsed: usize) -> f64 {
        self.0.get(elapsed)
    }

    fn memory(&self) -> Option<usize> {
        self.0.window()
    }
}

/// `sum_{a < t} f(z(a), t - a)`, evaluated term by term.
pub fn accumulated_reward<R: RewardRate>(states: &[usize], t: usize, rate: &R) -> f64 {
    let start = rate.memory().map_or(0, |m| t.saturating_sub(m));
    (start..t).map(|a| rate.rate(states[a], t - a)).sum()
}

/// Recovers the accumulated reward at the last transition `T_N <= n` from
/// its value at minute `n`, by removing the current sojourn's contribution
/// and re-weighting every earlier sojourn from elapsed `n - a` to `T_N - a`.
///
/// `N(n)` must be at least 1.
pub fn lemma_reconstruct<R: RewardRate>(path: &StatePath, rate: &R, n: usize, reward_at_n: f64) -> f64 {
    let transitions = path.transitions();
    let big_n = path.transition_count_at(n);
    debug_assert!(big_n >= 1);
    let t_last = transitions[big_n].time;
    let current = transitions[big_n].state;

    let mut current_sojourn = 0.0;
    let start = rate.memory().map_or(t_last, |m| t_last.max(n.saturating_sub(m)));
    for a in start..n {
        current_sojourn += rate.rate(current, n - a);
    }

    // Earliest minute with a non-zero rate at elapsed T_N - a.
    let floor = rate.memory().map_or(0, |m| t_last.saturating_sub(m));
    let mut reweight = 0.0;
    for k in 0..big_n {
        let block_state = transitions[big_n - 1 - k].state;
        let block_start = transitions[big_n - 1 - k].time;
        let block_end = transitions[big_n - k].time;
        if block_end <= floor {
            break;
        }
        for a in block_start.max(floor)..block_end {
            reweight += rate.rate(block_state, t_last - a) - rate.rate(block_state, n - a);
        }
    }
    reward_at_n - current_sojourn + reweight
}

/// `U_{N(n)} - U(n)` for an un-normalized index with rate `rate` and
/// initial value `u0`, computed through the sojourn decomposition.
pub fn delta_u_with<R: RewardRate>(path: &StatePath, rate: &R, u0: f64, n: usize) -> f64 {
    let u_n = if n == 0 {
        u0
    } else {
        accumulated_reward(path.states(), n, rate)
    };
    if path.transition_count_at(n) == 0 {
        return u0 - u_n;
    }
    lemma_reconstruct(path, rate, n, u_n) - u_n
}

/// `U_{N(n)} - U(n)` for the normalized EWMA index. Numerator and
/// denominator are each recovered through the sojourn decomposition.
pub fn delta_u(path: &StatePath, spec: &IndexSpec, n: usize) -> f64 {
    let num_rate = EwmaNumerator::new(spec);
    let den_rate = EwmaDenominator::new(spec);
    let (num_n, den_n) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            accumulated_reward(path.states(), n, &num_rate),
            accumulated_reward(path.states(), n, &den_rate),
        )
    };
    let u_n = if den_n > 0.0 { num_n / den_n } else { spec.u0 };
    if path.transition_count_at(n) == 0 {
        return spec.u0 - u_n;
    }
    let num_t = lemma_reconstruct(path, &num_rate, n, num_n);
    let den_t = lemma_reconstruct(path, &den_rate, n, den_n);
    num_t / den_t - u_n
}

/// O(1)-per-minute EWMA index, fed one minute state at a time.
#[derive(Debug, Clone)]
pub struct IndexTracker {
    lambda: f64,
    squared: Vec<f64>,
    u0: f64,
    num: f64,
    den: f64,
    /// Recent states still inside the truncation window, with the weight
    /// at which each leaves it.
    window: Option<(usize, VecDeque<usize>, f64)>,
    minutes: usize,
}

impl IndexTracker {
    pub fn new(spec: &IndexSpec) -> Self {
        let window = spec.window().map(|w| {
            (w, VecDeque::with_capacity(w + 1), spec.lambda.powi(w as i32 + 1))
        });
        Self {
            lambda: spec.lambda,
            squared: spec.squared_representative.clone(),
            u0: spec.u0,
            num: 0.0,
            den: 0.0,
            window,
            minutes: 0,
        }
    }

    /// Appends the state of the current minute and advances to the next.
    pub fn push(&mut self, state: usize) {
        let x = self.squared[state];
        self.num = self.lambda * (self.num + x);
        self.den = self.lambda * (self.den + 1.0);
        if let Some((w, buf, drop_weight)) = &mut self.window {
            buf.push_back(state);
            if buf.len() > *w {
                let old = buf.pop_front().expect("non-empty");
                self.num -= *drop_weight * self.squared[old];
                self.den -= *drop_weight;
            }
        }
        self.minutes += 1;
    }

    /// Index value at the current minute.
    pub fn value(&self) -> f64 {
        if self.minutes == 0 {
            self.u0
        } else {
            self.num / self.den
        }
    }

    pub fn minutes(&self) -> usize {
        self.minutes
    }
}

/// Index values at transitions and at every minute of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPath {
    /// `U_n` for each transition record `n`.
    pub at_transitions: Vec<f64>,
    /// `U(t)` for `t = 0..=L`, where `L` is the path length.
    pub at_minutes: Vec<f64>,
}

impl IndexPath {
    pub fn compute(path: &StatePath, spec: &IndexSpec) -> Self {
        let at_minutes = index_at_minutes(path, spec);
        let at_transitions = path
            .transitions()
            .iter()
            .map(|tr| at_minutes[tr.time])
            .collect();
        Self {
            at_transitions,
            at_minutes,
        }
    }

    /// Index at the last transition at or before minute `t`.
    pub fn at_last_transition(&self, path: &StatePath, t: usize) -> f64 {
        self.at_transitions[path.transition_count_at(t)]
    }
}

pub fn index_at_minutes(path: &StatePath, spec: &IndexSpec) -> Vec<f64> {
    let mut tracker = IndexTracker::new(spec);
    let mut out = Vec::with_capacity(path.len() + 1);
    out.push(tracker.value());
    for &k in path.states() {
        tracker.push(k);
        out.push(tracker.value());
    }
    out
}

pub fn index_at_transitions(path: &StatePath, spec: &IndexSpec) -> Vec<f64> {
    IndexPath::compute(path, spec).at_transitions
}

/// Ordinal discretization of index values into `levels` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIndexBins", into = "RawIndexBins")]
pub struct IndexBins {
    boundaries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawIndexBins {
    levels: usize,
    boundaries: Vec<f64>,
}

impl TryFrom<RawIndexBins> for IndexBins {
    type Error = Error;

    fn try_from(raw: RawIndexBins) -> Result<Self> {
        if raw.levels != raw.boundaries.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} levels need {} boundaries, got {}",
                raw.levels,
                raw.levels.saturating_sub(1),
                raw.boundaries.len()
            )));
        }
        IndexBins::new(raw.boundaries)
    }
}

impl From<IndexBins> for RawIndexBins {
    fn from(b: IndexBins) -> Self {
        RawIndexBins {
            levels: b.levels(),
            boundaries: b.boundaries,
        }
    }
}

impl IndexBins {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.iter().any(|b| !b.is_finite()) || !boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "index boundaries must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    /// A single level: the index has no influence.
    pub fn single() -> Self {
        Self { boundaries: Vec::new() }
    }

    pub fn levels(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// 0-based level; a value equal to a boundary belongs to the upper level.
    pub fn level_of(&self, x: f64) -> usize {
        self.boundaries.partition_point(|&b| b <= x)
    }
}

/// Quantile boundaries at `1/levels, ..., (levels-1)/levels`.
pub fn fit_index_bins(index_values: &[f64], levels: usize) -> Result<IndexBins> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be at least 1".into()));
    }
    if index_values.is_empty() || index_values.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateIndex("no finite index values".into()));
    }
    let mut sorted = index_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let targets: Vec<f64> = (1..levels).map(|k| k as f64 / levels as f64).collect();
    let cuts = select_cuts(&sorted, &targets).ok_or_else(|| {
        Error::DegenerateIndex(format!("fewer than {levels} distinct index values"))
    })?;
    IndexBins::new(cuts)
}
