//! Independent reference computations.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wismc::estimation::{FollowerContext, FollowerKernel};
use wismc::market_data::{Sign, StatePath};
use wismc::semimarkov::IndexedKernel;

/// Total variation between two count histograms.
pub fn tv_counts(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let len = a.len().max(b.len());
    let get = |v: &[u64], k: usize| v.get(k).copied().unwrap_or(0) as f64;
    (0..len)
        .map(|k| (get(a, k) / na as f64 - get(b, k) / nb as f64).abs())
        .sum::<f64>()
        / 2.0
}

/// Histogram of the first `limit` completed sojourn lengths.
pub fn sojourn_histogram(path: &StatePath, t_max: usize, limit: usize) -> Vec<u64> {
    let mut h = vec![0u64; t_max + 1];
    for w in path.transitions().windows(2).take(limit) {
        h[(w[1].time - w[0].time).min(t_max)] += 1;
    }
    h
}

pub fn completed_sojourns(path: &StatePath) -> usize {
    path.transitions().len() - 1
}

pub fn state_histogram(path: &StatePath) -> Vec<u64> {
    let mut h = vec![0u64; path.n_states()];
    for &k in path.states() {
        h[k] += 1;
    }
    h
}

/// Plain semi-Markov sampler for a single-level kernel: the next state
/// from the embedded chain, then the sojourn from the conditional
/// waiting-time law of that pair.
pub struct SemiMarkovReference {
    p: Vec<Vec<f64>>,
    /// `cond[i][j][t-1]` = P(T = t | i -> j).
    cond: Vec<Vec<Vec<f64>>>,
}

impl SemiMarkovReference {
    pub fn new(kernel: &IndexedKernel) -> Self {
        let s = kernel.n_states();
        let t_max = kernel.t_max();
        let p: Vec<Vec<f64>> = (0..s)
            .map(|i| (0..s).map(|j| kernel.cumulative(i, 0, j, t_max)).collect())
            .collect();
        let cond = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| {
                        (1..=t_max)
                            .map(|t| {
                                if p[i][j] > 0.0 {
                                    kernel.kernel_increment(i, 0, j, t) / p[i][j]
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { p, cond }
    }

    fn draw(weights: &[f64], x: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last = k;
                acc += w;
                if x < acc {
                    return k;
                }
            }
        }
        last
    }

    /// Simulates until `transitions` jumps have happened.
    pub fn simulate(&self, start: usize, transitions: usize, seed: u64) -> StatePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::new();
        let mut i = start;
        for _ in 0..=transitions {
            let j = Self::draw(&self.p[i], rng.gen());
            let t = Self::draw(&self.cond[i][j], rng.gen()) + 1;
            states.extend(std::iter::repeat_n(i, t));
            i = j;
        }
        StatePath::from_states(states, self.p.len()).expect("valid path")
    }
}

/// Stationary contemporaneous correlation of leader and follower returns,
/// by power iteration of the joint one-step law over
/// `(leader state, leader backward time, follower state, follower backward
/// time)`. Both models must have a single index level.
pub fn product_chain_correlation(
    leader: &IndexedKernel,
    follower: &FollowerKernel,
    r_leader: &[f64],
    r_follower: &[f64],
) -> f64 {
    let (s2, t2) = (leader.n_states(), leader.t_max());
    let (s1, t1) = (follower.n_states(), follower.t_max());
    let idx = |i2: usize, u2: usize, i1: usize, u1: usize| ((i2 * t2 + u2) * s1 + i1) * t1 + u1;
    let n = s2 * t2 * s1 * t1;

    // Leader one-step law straight from the kernel masses.
    let mut leader_law = vec![(0.0, vec![0.0; s2]); s2 * t2];
    for i in 0..s2 {
        let surv = |u: usize| -> f64 {
            (0..s2)
                .map(|j| (u + 1..=t2).map(|t| leader.kernel_increment(i, 0, j, t)).sum::<f64>())
                .sum()
        };
        for u in 0..t2 {
            let at_risk = surv(u);
            if at_risk <= 0.0 {
                continue;
            }
            let stay = surv(u + 1) / at_risk;
            let change = (0..s2).map(|j| leader.kernel_increment(i, 0, j, u + 1) / at_risk).collect();
            leader_law[i * t2 + u] = (stay, change);
        }
    }

    let mut pi = vec![0.0; n];
    pi[idx(s2 / 2, 0, s1 / 2, 0)] = 1.0;
    for _ in 0..200_000 {
        let mut next = vec![0.0; n];
        for i2 in 0..s2 {
            for u2 in 0..t2 {
                let (stay2, change2) = &leader_law[i2 * t2 + u2];
                let moves2: Vec<(usize, usize, f64)> = std::iter::once((i2, u2 + 1, *stay2))
                    .chain((0..s2).map(|j| (j, 0, change2[j])))
                    .filter(|m| m.2 > 0.0)
                    .collect();
                for i1 in 0..s1 {
                    for u1 in 0..t1 {
                        let mass = pi[idx(i2, u2, i1, u1)];
                        if mass == 0.0 {
                            continue;
                        }
                        for &(j2, d2, p2) in &moves2 {
                            let sign = Sign::of_state(j2, s2);
                            let ctx = FollowerContext {
                                i: i1,
                                u: u1,
                                v: 0,
                                sign,
                            };
                            let law = &follower.get(&ctx).expect("hand-built follower").probs;
                            let stay_u = (u1 + 1).min(t1 - 1);
                            next[idx(j2, d2, i1, stay_u)] += mass * p2 * law.stay_prob;
                            for (j1, &p1) in law.change_probs.iter().enumerate() {
                                if p1 > 0.0 {
                                    next[idx(j2, d2, j1, 0)] += mass * p2 * p1;
                                }
                            }
                        }
                    }
                }
            }
        }
        let diff: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-14 {
            break;
        }
    }

    let (mut m1, mut m2, mut m11, mut m22, mut m12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i2 in 0..s2 {
        for u2 in 0..t2 {
            for i1 in 0..s1 {
                for u1 in 0..t1 {
                    let p = pi[idx(i2, u2, i1, u1)];
                    let (a, b) = (r_follower[i1], r_leader[i2]);
                    m1 += p * a;
                    m2 += p * b;
                    m11 += p * a * a;
                    m22 += p * b * b;
                    m12 += p * a * b;
                }
            }
        }
    }
    (m12 - m1 * m2) / ((m11 - m1 * m1) * (m22 - m2 * m2)).sqrt()
}
