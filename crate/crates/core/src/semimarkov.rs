//! The weighted-indexed semi-Markov kernel `Q_ij(v; t)` on a finite grid of
//! sojourn times `t = 1..=t_max`, and the laws derived from it: the embedded
//! chain, sojourn distributions, conditional waiting times and the
//! minute-by-minute law of the backward-time augmented process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Support assigned to rows of hand-built kernels: treated as exact.
pub const HAND_BUILT_SUPPORT: u64 = u64::MAX;

/// Default sojourn horizon in minutes.
pub const DEFAULT_T_MAX: usize = 1000;

const ROW_SUM_TOL: f64 = 1e-9;

/// State `i`, minutes `u` since entering it, and the index level `v` of
/// `U` at the last transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BackwardState {
    pub i: usize,
    pub u: usize,
    pub v: usize,
}

/// Next-minute law from a backward state: stay (`u + 1`) or jump to `j`
/// with backward time 0. `change_probs[i]` is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepDist {
    pub stay_prob: f64,
    pub change_probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Stay,
    Change(usize),
}

impl OneStepDist {
    pub fn total(&self) -> f64 {
        self.stay_prob + self.change_probs.iter().sum::<f64>()
    }

    /// Inverse-CDF draw for a uniform `x` in `[0, 1)`: stay first, then
    /// destinations in increasing order.
    pub fn sample(&self, x: f64) -> Step {
        let mut acc = self.stay_prob;
        if x < acc {
            return Step::Stay;
        }
        let mut last = None;
        for (j, &p) in self.change_probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(j);
            if x < acc {
                return Step::Change(j);
            }
        }
        // Rounding left x above the total mass.
        last.map_or(Step::Stay, Step::Change)
    }

    /// Total-variation distance between two laws over the same state space.
    pub fn tv_distance(&self, other: &OneStepDist) -> f64 {
        let mut d = (self.stay_prob - other.stay_prob).abs();
        for (a, b) in self.change_probs.iter().zip(&other.change_probs) {
            d += (a - b).abs();
        }
        d / 2.0
    }
}

/// Dense kernel over `(i, v, j, t)`, `t` fastest. Rows `(i, v)` without data
/// are all zero and carry zero support.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedKernel {
    s: usize,
    levels: usize,
    t_max: usize,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
    /// `1 - H_i(v; u)` for `u = 0..=t_max`, accumulated from the tail so
    /// each value is exactly the sum of the masses it covers.
    survival: Vec<f64>,
    support: Vec<u64>,
    /// Per row: cumulative outcome mass ordered by `(t, j)`.
    outcome_cdf: Vec<f64>,
}

impl IndexedKernel {
    /// Builds a kernel from one-step masses `q_ij(v; t)`. Each non-empty row
    /// is renormalized to total mass 1 at `t_max`.
    pub fn from_increments(s: usize, levels: usize, t_max: usize, mut q: Vec<f64>) -> Result<Self> {
        check_dims(s, levels, t_max, q.len())?;
        if q.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidKernel("masses must be finite and non-negative".into()));
        }
        let row_len = s * t_max;
        let mut support = vec![0u64; s * levels];
        for (r, row) in q.chunks_mut(row_len).enumerate() {
            let i = r / levels;
            if row[i * t_max..(i + 1) * t_max].iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidKernel(format!("self-transition mass in row {r}")));
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|x| *x /= total);
                support[r] = HAND_BUILT_SUPPORT;
            }
        }
        let cumulative = prefix_sums(&q, t_max);
        Ok(Self::assemble(s, levels, t_max, q, cumulative, support))
    }

    /// Builds a kernel from integer outcome counts over `(i, v, j, t)`.
    /// Every probability is an exact ratio of two integers.
    pub fn from_counts(s: usize, levels: usize, t_max: usize, counts: &[u64]) -> Result<Self> {
        check_dims(s, levels, t_max, counts.len())?;
        let row_len = s * t_max;
        let mut increments = vec![0.0; counts.len()];
        let mut cumulative = vec![0.0; counts.len()];
        let mut support = vec![0u64; s * levels];
        for (r, row) in counts.chunks(row_len).enumerate() {
            let i = r / levels;
            if row[i * t_max..(i + 1) * t_max].iter().any(|&c| c != 0) {
                return Err(Error::InvalidKernel(format!("self-transition count in row {r}")));
            }
            let n: u64 = row.iter().sum();
            support[r] = n;
            if n == 0 {
                continue;
            }
            let nf = n as f64;
            for j in 0..s {
                let mut running = 0u64;
                for t in 0..t_max {
                    let k = r * row_len + j * t_max + t;
                    running += counts[k];
                    increments[k] = counts[k] as f64 / nf;
                    cumulative[k] = running as f64 / nf;
                }
            }
        }
        Ok(Self::assemble(s, levels, t_max, increments, cumulative, support))
    }

    /// Builds a kernel from cumulative values `Q_ij(v; t)` and per-row
    /// support, checking every kernel invariant.
    pub fn from_cumulative(
        s: usize,
        levels: usize,
        t_max: usize,
        cumulative: Vec<f64>,
        support: Vec<u64>,
    ) -> Result<Self> {
        check_dims(s, levels, t_max, cumulative.len())?;
        if support.len() != s * levels {
            return Err(Error::InvalidKernel(format!(
                "expected {} support counts, got {}",
                s * levels,
                support.len()
            )));
        }
        let row_len = s * t_max;
        let mut increments = vec![0.0; cumulative.len()];
        for (r, row) in cumulative.chunks(row_len).enumerate() {
            let i = r / levels;
            let mut row_total = 0.0;
            for j in 0..s {
                let cells = &row[j * t_max..(j + 1) * t_max];
                let mut prev = 0.0;
                for (t, &x) in cells.iter().enumerate() {
                    if !(0.0..=1.0).contains(&x) || x < prev {
                        return Err(Error::InvalidKernel(format!(
                            "row {r}, j={j}: Q must be non-decreasing in [0, 1]"
                        )));
                    }
                    increments[r * row_len + j * t_max + t] = x - prev;
                    prev = x;
                }
                if j == i && prev != 0.0 {
                    return Err(Error::InvalidKernel(format!("self-transition mass in row {r}")));
                }
                row_total += prev;
            }
            let expected = if support[r] > 0 { 1.0 } else { 0.0 };
            if (row_total - expected).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidKernel(format!(
                    "row {r} sums to {row_total} at t_max (support {})",
                    support[r]
                )));
            }
        }
        Ok(Self::assemble(s, levels, t_max, increments, cumulative, support))
    }

    fn assemble(
        s: usize,
        levels: usize,
        t_max: usize,
        increments: Vec<f64>,
        cumulative: Vec<f64>,
        support: Vec<u64>,
    ) -> Self {
        let rows = s * levels;
        let row_len = s * t_max;
        let mut survival = vec![0.0; rows * (t_max + 1)];
        let mut outcome_cdf = vec![0.0; rows * row_len];
        for r in 0..rows {
            let row = &increments[r * row_len..(r + 1) * row_len];
            let surv = &mut survival[r * (t_max + 1)..(r + 1) * (t_max + 1)];
            for u in (0..t_max).rev() {
                let exits: f64 = (0..s).map(|j| row[j * t_max + u]).sum();
                surv[u] = surv[u + 1] + exits;
            }
            let cdf = &mut outcome_cdf[r * row_len..(r + 1) * row_len];
            let mut acc = 0.0;
            for t in 0..t_max {
                for j in 0..s {
                    acc += row[j * t_max + t];
                    cdf[t * s + j] = acc;
                }
            }
        }
        Self {
            s,
            levels,
            t_max,
            increments,
            cumulative,
            survival,
            support,
            outcome_cdf,
        }
    }

    pub fn n_states(&self) -> usize {
        self.s
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    fn row(&self, i: usize, v: usize) -> usize {
        i * self.levels + v
    }

    fn cell(&self, i: usize, v: usize, j: usize, t: usize) -> usize {
        (self.row(i, v) * self.s + j) * self.t_max + (t - 1)
    }

    /// Flat cumulative payload, ordered `(i, v, j, t)` with `t` fastest.
    pub fn cumulative_values(&self) -> &[f64] {
        &self.cumulative
    }

    /// Number of observed sojourns behind row `(i, v)`.
    pub fn support(&self, i: usize, v: usize) -> u64 {
        self.support[self.row(i, v)]
    }

    pub fn supports(&self) -> &[u64] {
        &self.support
    }

    pub fn has_data(&self, i: usize, v: usize) -> bool {
        self.support(i, v) > 0
    }

    /// `Q_ij(v; t)`; zero at `t = 0`.
    pub fn cumulative(&self, i: usize, v: usize, j: usize, t: usize) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.cumulative[self.cell(i, v, j, t.min(self.t_max))]
        }
    }

    /// `q_ij(v; t) = Q_ij(v; t) - Q_ij(v; t - 1)` for `1 <= t <= t_max`.
    pub fn kernel_increment(&self, i: usize, v: usize, j: usize, t: usize) -> f64 {
        assert!((1..=self.t_max).contains(&t), "t={t} outside 1..={}", self.t_max);
        self.increments[self.cell(i, v, j, t)]
    }

    /// `1 - H_i(v; u)` for `0 <= u <= t_max`.
    pub fn survival(&self, i: usize, v: usize, u: usize) -> f64 {
        self.survival[self.row(i, v) * (self.t_max + 1) + u.min(self.t_max)]
    }

    /// `p_ij(v) = Q_ij(v; t_max)`, indexed `[i][v][j]`.
    pub fn embedded_p(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.s)
            .map(|i| {
                (0..self.levels)
                    .map(|v| (0..self.s).map(|j| self.cumulative(i, v, j, self.t_max)).collect())
                    .collect()
            })
            .collect()
    }

    /// `H_i(v; t) = sum_j Q_ij(v; t)`, indexed `[i][v][t]` for `t = 0..=t_max`.
    pub fn sojourn_cdf(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.s)
            .map(|i| {
                (0..self.levels)
                    .map(|v| {
                        (0..=self.t_max)
                            .map(|t| (0..self.s).map(|j| self.cumulative(i, v, j, t)).sum())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `G_ij(v; t) = Q_ij(v; t) / p_ij(v)`, or 1 where `p_ij(v) = 0`;
    /// indexed `[i][v][j][t]` for `t = 0..=t_max`.
    pub fn conditional_g(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.s)
            .map(|i| {
                (0..self.levels)
                    .map(|v| {
                        (0..self.s)
                            .map(|j| {
                                let p = self.cumulative(i, v, j, self.t_max);
                                (0..=self.t_max)
                                    .map(|t| {
                                        if p == 0.0 {
                                            1.0
                                        } else {
                                            self.cumulative(i, v, j, t) / p
                                        }
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Next-minute law of `(Z, B)` given backward state `b`:
    ///
    /// ```text
    /// stay        = (1 - H_i(v; u + 1)) / (1 - H_i(v; u))
    /// change to j = q_ij(v; u + 1)      / (1 - H_i(v; u))
    /// ```
    pub fn one_step_probs(&self, b: &BackwardState) -> Result<OneStepDist> {
        let BackwardState { i, u, v } = *b;
        if i >= self.s || v >= self.levels || u >= self.t_max {
            return Err(Error::InvalidParameter(format!(
                "backward state (i={i}, u={u}, v={v}) outside kernel dimensions"
            )));
        }
        let denom = self.survival(i, v, u);
        if denom <= 0.0 {
            return Err(Error::UnreachableBackwardState { i, u, v });
        }
        let stay_prob = self.survival(i, v, u + 1) / denom;
        let change_probs = (0..self.s)
            .map(|j| self.increments[self.cell(i, v, j, u + 1)] / denom)
            .collect();
        Ok(OneStepDist {
            stay_prob,
            change_probs,
        })
    }

    /// Draws a full sojourn outcome `(j, t)` from row `(i, v)` for a uniform
    /// `x` in `[0, 1)`. `None` if the row is empty.
    pub fn sample_outcome(&self, i: usize, v: usize, x: f64) -> Option<(usize, usize)> {
        let row_len = self.s * self.t_max;
        let r = self.row(i, v);
        let cdf = &self.outcome_cdf[r * row_len..(r + 1) * row_len];
        let total = *cdf.last()?;
        if total <= 0.0 {
            return None;
        }
        let target = x * total;
        // First cell whose cumulative mass exceeds the target; it has
        // positive mass by construction.
        let mut k = cdf.partition_point(|&c| c <= target);
        if k >= row_len {
            k = (0..row_len).rev().find(|&k| self.increments_by_cdf(r, k) > 0.0)?;
        }
        let t = k / self.s + 1;
        let j = k % self.s;
        Some((j, t))
    }

    fn increments_by_cdf(&self, r: usize, k: usize) -> f64 {
        let t = k / self.s;
        let j = k % self.s;
        self.increments[(r * self.s + j) * self.t_max + t]
    }

    /// Identical rows across index levels: the kernel is an ordinary
    /// semi-Markov kernel.
    pub fn is_level_invariant(&self) -> bool {
        let row_len = self.s * self.t_max;
        (0..self.s).all(|i| {
            let base = &self.increments[self.row(i, 0) * row_len..(self.row(i, 0) + 1) * row_len];
            (1..self.levels).all(|v| {
                let r = self.row(i, v);
                &self.increments[r * row_len..(r + 1) * row_len] == base
            })
        })
    }
}

fn check_dims(s: usize, levels: usize, t_max: usize, len: usize) -> Result<()> {
    if s < 2 || levels == 0 || t_max == 0 {
        return Err(Error::InvalidKernel(format!(
            "invalid dimensions s={s}, levels={levels}, t_max={t_max}"
        )));
    }
    let expected = s
        .checked_mul(levels)
        .and_then(|x| x.checked_mul(s))
        .and_then(|x| x.checked_mul(t_max))
        .ok_or_else(|| Error::InvalidKernel("kernel dimensions overflow".into()))?;
    if len != expected {
        return Err(Error::InvalidKernel(format!(
            "expected {expected} kernel cells, got {len}"
        )));
    }
    Ok(())
}

fn prefix_sums(q: &[f64], t_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(q.len());
    for chunk in q.chunks(t_max) {
        let mut acc = 0.0;
        for &x in chunk {
            acc += x;
            out.push(acc);
        }
    }
    out
}
