use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_process::{IndexBins, IndexPath};
use crate::market_data::{Sign, StatePath};
use crate::semimarkov::{OneStepDist, HAND_BUILT_SUPPORT};

const PROB_TOL: f64 = 1e-9;

/// Which value of the follower's own index sets the level of a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FollowerIndexAt {
    /// Index at the follower's last transition at or before `t - 1`.
    #[default]
    Transition,
    /// Index at minute `t - 1`.
    Minute,
}

/// Follower state `i`, backward time `u` (capped at `t_max - 1`), own index
/// level `v` and the sign of the leader's state in the same minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FollowerContext {
    pub i: usize,
    pub u: usize,
    pub v: usize,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextRow {
    pub support: u64,
    pub probs: OneStepDist,
}

/// Sign-conditioned one-step law of the follower.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerKernel {
    s: usize,
    levels: usize,
    t_max: usize,
    index_at: FollowerIndexAt,
    rows: BTreeMap<FollowerContext, ContextRow>,
}

impl FollowerKernel {
    pub fn from_rows(
        s: usize,
        levels: usize,
        t_max: usize,
        index_at: FollowerIndexAt,
        rows: BTreeMap<FollowerContext, ContextRow>,
    ) -> Result<Self> {
        if s < 2 || levels == 0 || t_max == 0 {
            return Err(Error::InvalidKernel(format!(
                "invalid follower dimensions s={s}, levels={levels}, t_max={t_max}"
            )));
        }
        for (ctx, row) in &rows {
            if ctx.i >= s || ctx.v >= levels || ctx.u >= t_max {
                return Err(Error::InvalidKernel(format!("context {ctx:?} outside dimensions")));
            }
            let p = &row.probs;
            if p.change_probs.len() != s {
                return Err(Error::InvalidKernel(format!("context {ctx:?} has wrong row width")));
            }
            if std::iter::once(p.stay_prob)
                .chain(p.change_probs.iter().copied())
                .any(|x| !(0.0..=1.0).contains(&x))
            {
                return Err(Error::InvalidKernel(format!("context {ctx:?} has invalid probabilities")));
            }
            if p.change_probs[ctx.i] != 0.0 {
                return Err(Error::InvalidKernel(format!("context {ctx:?} changes to itself")));
            }
            if (p.total() - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidKernel(format!("context {ctx:?} sums to {}", p.total())));
            }
            if row.support == 0 {
                return Err(Error::InvalidKernel(format!("context {ctx:?} has zero support")));
            }
        }
        Ok(Self {
            s,
            levels,
            t_max,
            index_at,
            rows,
        })
    }

    /// Fills every context from `law`, each treated as exact.
    pub fn hand_built(
        s: usize,
        levels: usize,
        t_max: usize,
        index_at: FollowerIndexAt,
        law: impl Fn(&FollowerContext) -> OneStepDist,
    ) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for i in 0..s {
            for u in 0..t_max {
                for v in 0..levels {
                    for sign in Sign::ALL {
                        let ctx = FollowerContext { i, u, v, sign };
                        let probs = law(&ctx);
                        rows.insert(
                            ctx,
                            ContextRow {
                                support: HAND_BUILT_SUPPORT,
                                probs,
                            },
                        );
                    }
                }
            }
        }
        Self::from_rows(s, levels, t_max, index_at, rows)
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

    pub fn index_at(&self) -> FollowerIndexAt {
        self.index_at
    }

    pub fn rows(&self) -> &BTreeMap<FollowerContext, ContextRow> {
        &self.rows
    }

    pub fn get(&self, ctx: &FollowerContext) -> Option<&ContextRow> {
        self.rows.get(ctx)
    }

    /// Caps a backward time to the context grid.
    pub fn cap_u(&self, u: usize) -> usize {
        u.min(self.t_max - 1)
    }
}

/// Counts follower one-step outcomes by context and leader sign.
///
/// The leader supplies only its sign at minute `t`; the follower's context
/// is read at `t - 1` and its outcome at `t`.
pub fn estimate_follower(
    leader: &StatePath,
    follower: &StatePath,
    follower_index: &IndexPath,
    bins: &IndexBins,
    t_max: usize,
    index_at: FollowerIndexAt,
) -> Result<FollowerKernel> {
    if leader.len() != follower.len() {
        return Err(Error::GridMismatch(format!(
            "leader has {} minutes, follower {}",
            leader.len(),
            follower.len()
        )));
    }
    if follower_index.at_minutes.len() != follower.len() + 1
        || follower_index.at_transitions.len() != follower.transitions().len()
    {
        return Err(Error::GridMismatch("follower index does not match its path".into()));
    }
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be positive".into()));
    }
    let s = follower.n_states();
    let states = follower.states();
    let backward = follower.backward_times();
    let mut counts: BTreeMap<FollowerContext, (u64, Vec<u64>)> = BTreeMap::new();
    let mut n_trans = 0usize;
    for t in 1..states.len() {
        let prev = t - 1;
        if n_trans + 1 < follower.transitions().len() && follower.transitions()[n_trans + 1].time <= prev {
            n_trans += 1;
        }
        let level_value = match index_at {
            FollowerIndexAt::Transition => follower_index.at_transitions[n_trans],
            FollowerIndexAt::Minute => follower_index.at_minutes[prev],
        };
        let ctx = FollowerContext {
            i: states[prev],
            u: backward[prev].min(t_max - 1),
            v: bins.level_of(level_value),
            sign: Sign::of_state(leader.states()[t], leader.n_states()),
        };
        let entry = counts.entry(ctx).or_insert_with(|| (0, vec![0; s]));
        if states[t] == states[prev] {
            entry.0 += 1;
        } else {
            entry.1[states[t]] += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::InsufficientData("follower path has a single minute".into()));
    }
    let rows = counts
        .into_iter()
        .map(|(ctx, (stay, change))| {
            let n = stay + change.iter().sum::<u64>();
            let nf = n as f64;
            let probs = OneStepDist {
                stay_prob: stay as f64 / nf,
                change_probs: change.iter().map(|&c| c as f64 / nf).collect(),
            };
            (ctx, ContextRow { support: n, probs })
        })
        .collect();
    FollowerKernel::from_rows(s, bins.levels(), t_max, index_at, rows)
}
