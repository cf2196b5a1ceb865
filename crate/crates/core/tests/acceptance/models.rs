//! Hand-built models shared by the acceptance criteria.

use wismc::estimation::{FollowerIndexAt, FollowerKernel};
use wismc::index_process::{fit_index_bins, IndexBins, IndexPath, IndexSpec};
use wismc::market_data::{BinSpec, Sign};
use wismc::semimarkov::{IndexedKernel, OneStepDist};
use wismc::simulation::{simulate_stepwise, Model, SimConfig};

/// Kernel from a mass function `q(i, v, j, t)`; rows are renormalized.
pub fn kernel_from_fn(
    s: usize,
    levels: usize,
    t_max: usize,
    q: impl Fn(usize, usize, usize, usize) -> f64,
) -> IndexedKernel {
    let mut cells = vec![0.0; s * levels * s * t_max];
    for i in 0..s {
        for v in 0..levels {
            for j in (0..s).filter(|&j| j != i) {
                for t in 1..=t_max {
                    cells[((i * levels + v) * s + j) * t_max + t - 1] = q(i, v, j, t);
                }
            }
        }
    }
    IndexedKernel::from_increments(s, levels, t_max, cells).expect("valid hand kernel")
}

/// 3 states, one level, uniform destinations, geometric(1/2) sojourns
/// truncated at 8.
pub fn geometric_kernel() -> IndexedKernel {
    kernel_from_fn(3, 1, 8, |_, _, _, t| 0.5f64.powi(t as i32) / 2.0)
}

/// Sojourn hazard and destination weights that both move with the level.
pub fn level_dependent_kernel(s: usize, levels: usize, t_max: usize) -> IndexedKernel {
    kernel_from_fn(s, levels, t_max, |i, v, j, t| {
        let h = 0.35 + 0.4 * v as f64 / levels.max(2) as f64 + 0.05 * i as f64;
        let dest = 1.0 + ((i + 2 * j + v) % s) as f64 * (0.5 + 0.2 * v as f64);
        h * (1.0 - h).powi(t as i32 - 1) * dest
    })
}

/// Five-state bins with representatives `(-2, -1, 0, 1, 2) * 1e-3`.
pub fn five_state_bins() -> BinSpec {
    BinSpec::new(
        vec![-3e-3, -1.5e-3, -0.5e-3, 0.5e-3, 1.5e-3, 3e-3],
        vec![-2e-3, -1e-3, 0.0, 1e-3, 2e-3],
    )
    .expect("valid bins")
}

pub fn three_state_bins(scale: f64) -> BinSpec {
    BinSpec::new(
        vec![-2.0 * scale, -0.5 * scale, 0.5 * scale, 2.0 * scale],
        vec![-scale, 0.0, scale],
    )
    .expect("valid bins")
}

/// Five-state volatility-feedback kernel whose returns are a martingale
/// difference: off-center states last exactly one minute and every
/// destination law has mean-zero representative value. From any off-center
/// state the next squared return has the same law, so squared returns
/// correlate only through the index level. Higher levels shorten center
/// sojourns and keep the walk away from the center.
pub fn volatility_kernel(levels: usize) -> IndexedKernel {
    let t_max = 60;
    let scale = |v: usize| v as f64 / (levels - 1).max(1) as f64;
    kernel_from_fn(5, levels, t_max, move |i, v, j, t| {
        let x = scale(v);
        // Equal center hazard and off-center persistence make the
        // off-center fraction equal to this value.
        let activity = 0.05 + 0.85 * x;
        let (hazard, away) = (activity, activity);
        // Destinations as seen from a positive state; negatives mirror.
        let (from, to) = if i < 2 { (4 - i, 4 - j) } else { (i, j) };
        let dest = match (from, to) {
            (2, 2) => 0.0,
            (2, _) => 0.25,
            (_, 2) => 1.0 - away,
            // +1: to -1 w.p. 2/3, to +2 w.p. 1/3 of the off-center mass.
            (3, 1) => 2.0 * away / 3.0,
            (3, 4) => away / 3.0,
            // +2: to -2 w.p. 1/3, to +1 w.p. 2/3.
            (4, 0) => away / 3.0,
            (4, 3) => 2.0 * away / 3.0,
            _ => 0.0,
        };
        let sojourn = if i == 2 {
            hazard * (1.0 - hazard).powi(t as i32 - 1)
        } else if t == 1 {
            1.0
        } else {
            0.0
        };
        dest * sojourn
    })
}

/// Evenly spaced index bins up to the mean squared return of a fully
/// active walk, so that activity tracks the index almost one to one.
pub fn volatility_index_bins() -> IndexBins {
    IndexBins::new(vec![0.4e-6, 0.8e-6, 1.2e-6, 1.6e-6]).expect("valid bins")
}

/// Index bins at the quantiles of the transition index the model itself
/// produces, found by a short fixed-point iteration.
pub fn self_consistent_bins(kernel: &IndexedKernel, spec: &IndexSpec, initial: IndexBins, seed: u64) -> IndexBins {
    let mut bins = initial;
    for round in 0..4 {
        let m = Model {
            kernel,
            index: spec,
            bins: &bins,
        };
        let path = simulate_stepwise(&m, &SimConfig::new(100_000, seed + round)).expect("pilot run");
        let index = IndexPath::compute(&path, spec);
        bins = fit_index_bins(&index.at_transitions, kernel.levels()).expect("pilot bins");
    }
    bins
}

/// Follower that moves to the leader's sign state (`-` to 0, `0` to 1, `+`
/// to 2) with probability `p`, and otherwise to a uniform state.
pub fn sign_copying_follower(p: f64, t_max: usize) -> FollowerKernel {
    FollowerKernel::hand_built(3, 1, t_max, FollowerIndexAt::Transition, |ctx| {
        let target = ctx.sign.index();
        let mut next = [(1.0 - p) / 3.0; 3];
        next[target] += p;
        to_one_step(ctx.i, &next)
    })
    .expect("valid follower")
}

/// Follower whose law ignores the leader: stay w.p. 1/2, else uniform.
pub fn uncoupled_follower(t_max: usize) -> FollowerKernel {
    FollowerKernel::hand_built(3, 1, t_max, FollowerIndexAt::Transition, |ctx| {
        let mut next = [0.25; 3];
        next[ctx.i] = 0.5;
        to_one_step(ctx.i, &next)
    })
    .expect("valid follower")
}

/// Five-state follower that jumps to the leader's sign state (`-` to 1,
/// `0` to 2, `+` to 3) w.p. `p`, otherwise stays w.p. 1/2 or moves
/// uniformly.
pub fn five_state_follower(p: f64) -> FollowerKernel {
    FollowerKernel::hand_built(5, 1, 60, FollowerIndexAt::Transition, |ctx| {
        let target = match ctx.sign {
            Sign::Negative => 1,
            Sign::Zero => 2,
            Sign::Positive => 3,
        };
        let mut next = [(1.0 - p) * 0.5 / 4.0; 5];
        next[ctx.i] = (1.0 - p) * 0.5;
        next[target] += p;
        to_one_step(ctx.i, &next)
    })
    .expect("valid follower")
}

fn to_one_step(i: usize, next: &[f64]) -> OneStepDist {
    let mut change_probs = next.to_vec();
    change_probs[i] = 0.0;
    OneStepDist {
        stay_prob: next[i],
        change_probs,
    }
}
