use std::ops::Range;

use crate::error::{Error, Result};
use crate::index_process::{IndexBins, IndexPath};
use crate::market_data::StatePath;
use crate::semimarkov::IndexedKernel;

/// Sojourn outcome counts over `(i, v, j, t)`, `t` fastest.
///
/// Count tables from disjoint sojourn ranges merge by addition, so a path
/// can be counted in shards that share their boundary transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelCounts {
    s: usize,
    levels: usize,
    t_max: usize,
    n_transition: Vec<u64>,
    n_context: Vec<u64>,
    /// Final sojourns dropped because their end was not observed.
    pub censored: u64,
}

impl KernelCounts {
    pub fn new(s: usize, levels: usize, t_max: usize) -> Self {
        Self {
            s,
            levels,
            t_max,
            n_transition: vec![0; s * levels * s * t_max],
            n_context: vec![0; s * levels],
            censored: 0,
        }
    }

    /// Records one completed sojourn; durations beyond `t_max` are censored
    /// to `t_max`.
    pub fn record(&mut self, i: usize, v: usize, j: usize, duration: usize) {
        let t = duration.clamp(1, self.t_max);
        let row = i * self.levels + v;
        self.n_transition[(row * self.s + j) * self.t_max + t - 1] += 1;
        self.n_context[row] += 1;
    }

    pub fn transition_count(&self, i: usize, v: usize, j: usize, t: usize) -> u64 {
        self.n_transition[((i * self.levels + v) * self.s + j) * self.t_max + t - 1]
    }

    pub fn context_count(&self, i: usize, v: usize) -> u64 {
        self.n_context[i * self.levels + v]
    }

    pub fn completed(&self) -> u64 {
        self.n_context.iter().sum()
    }

    pub fn merge(&mut self, other: &KernelCounts) -> Result<()> {
        if (self.s, self.levels, self.t_max) != (other.s, other.levels, other.t_max) {
            return Err(Error::InvalidParameter("cannot merge count tables of different shapes".into()));
        }
        for (a, b) in self.n_transition.iter_mut().zip(&other.n_transition) {
            *a += b;
        }
        for (a, b) in self.n_context.iter_mut().zip(&other.n_context) {
            *a += b;
        }
        self.censored += other.censored;
        Ok(())
    }

    pub fn to_kernel(&self) -> Result<IndexedKernel> {
        if self.completed() == 0 {
            return Err(Error::InsufficientData(format!(
                "no completed sojourns ({} censored)",
                self.censored
            )));
        }
        IndexedKernel::from_counts(self.s, self.levels, self.t_max, &self.n_transition)
    }
}

/// Counts the sojourns that start at transition records in `range`. The
/// sojourn starting at the final record is censored.
pub fn count_sojourns(
    path: &StatePath,
    index: &IndexPath,
    bins: &IndexBins,
    t_max: usize,
    range: Range<usize>,
) -> Result<KernelCounts> {
    let transitions = path.transitions();
    if index.at_transitions.len() != transitions.len() {
        return Err(Error::GridMismatch(format!(
            "{} index values for {} transitions",
            index.at_transitions.len(),
            transitions.len()
        )));
    }
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be positive".into()));
    }
    let mut counts = KernelCounts::new(path.n_states(), bins.levels(), t_max);
    for n in range.start..range.end.min(transitions.len()) {
        let Some(next) = transitions.get(n + 1) else {
            counts.censored += 1;
            continue;
        };
        let v = bins.level_of(index.at_transitions[n]);
        counts.record(transitions[n].state, v, next.state, next.time - transitions[n].time);
    }
    Ok(counts)
}

/// Empirical-frequency kernel: `q_ij(v; t) = N(i, v, j, t) / N(i, v)` over
/// completed sojourns, with `v` the level of the index at the sojourn's
/// opening transition.
pub fn estimate_kernel(
    path: &StatePath,
    index: &IndexPath,
    bins: &IndexBins,
    t_max: usize,
) -> Result<IndexedKernel> {
    count_sojourns(path, index, bins, t_max, 0..path.transitions().len())?.to_kernel()
}
