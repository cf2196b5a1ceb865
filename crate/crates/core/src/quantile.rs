//! Tie-aware cut placement shared by the return and index discretizers.
//!
//! Cuts are placed in the gaps between consecutive distinct sample values, so
//! a run of tied values never straddles a boundary. For each target mass the
//! gap whose cumulative mass is nearest is chosen, in order.

/// Returns `targets.len()` strictly increasing cut points, or `None` when the
/// sample has too few distinct values to separate that many bins.
///
/// `sorted` must be sorted ascending and free of NaN; `targets` are
/// cumulative mass fractions in `(0, 1)`, ascending.
pub(crate) fn select_cuts(sorted: &[f64], targets: &[f64]) -> Option<Vec<f64>> {
    if targets.is_empty() {
        return Some(Vec::new());
    }
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    // (value, cumulative count through this value)
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for (idx, &x) in sorted.iter().enumerate() {
        match distinct.last_mut() {
            Some(last) if last.0 == x => last.1 = idx + 1,
            _ => distinct.push((x, idx + 1)),
        }
    }
    let gaps = distinct.len() - 1;
    if gaps < targets.len() {
        return None;
    }

    let mut cuts = Vec::with_capacity(targets.len());
    let mut next_gap = 0usize;
    for (k, &target) in targets.iter().enumerate() {
        let remaining = targets.len() - k - 1;
        let last_allowed = gaps - 1 - remaining;
        let mut best = next_gap;
        let mut best_err = f64::INFINITY;
        for g in next_gap..=last_allowed {
            let frac = distinct[g].1 as f64 / n as f64;
            let err = (frac - target).abs();
            if err < best_err {
                best_err = err;
                best = g;
            }
        }
        let lo = distinct[best].0;
        let hi = distinct[best + 1].0;
        cuts.push(lo + (hi - lo) / 2.0);
        next_gap = best + 1;
    }
    Some(cuts)
}
