use serde::{Deserialize, Serialize};

use super::grid::ReturnSeries;
use super::path::StatePath;
use crate::error::{Error, Result};
use crate::quantile::select_cuts;

/// Default fraction of returns that fall in the center (zero) bin.
pub const DEFAULT_CENTER_MASS: f64 = 0.25;

const SYMMETRY_TOL: f64 = 1e-15;

/// Sign of a discretized return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+")]
    Positive,
}

impl Sign {
    pub const ALL: [Sign; 3] = [Sign::Negative, Sign::Zero, Sign::Positive];

    /// Sign of a 0-based state in a symmetric space of `n_states` states.
    pub fn of_state(state: usize, n_states: usize) -> Sign {
        let center = n_states / 2;
        match state.cmp(&center) {
            std::cmp::Ordering::Less => Sign::Negative,
            std::cmp::Ordering::Equal => Sign::Zero,
            std::cmp::Ordering::Greater => Sign::Positive,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Negative => '-',
            Sign::Zero => '0',
            Sign::Positive => '+',
        }
    }
}

/// Symmetric discretization of returns into `s` states.
///
/// States are 0-based internally: state `k` covers
/// `[boundaries[k], boundaries[k+1]]`, with the center state `s / 2`
/// straddling zero. Serialized as `{ "s", "boundaries", "representatives" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBinSpec", into = "RawBinSpec")]
pub struct BinSpec {
    boundaries: Vec<f64>,
    representatives: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBinSpec {
    s: usize,
    boundaries: Vec<f64>,
    representatives: Vec<f64>,
}

impl TryFrom<RawBinSpec> for BinSpec {
    type Error = Error;

    fn try_from(raw: RawBinSpec) -> Result<Self> {
        let spec = BinSpec::new(raw.boundaries, raw.representatives)?;
        if spec.n_states() != raw.s {
            return Err(Error::InvalidParameter(format!(
                "declared s={} but {} representatives",
                raw.s,
                spec.n_states()
            )));
        }
        Ok(spec)
    }
}

impl From<BinSpec> for RawBinSpec {
    fn from(b: BinSpec) -> Self {
        RawBinSpec {
            s: b.n_states(),
            boundaries: b.boundaries,
            representatives: b.representatives,
        }
    }
}

impl BinSpec {
    pub fn new(boundaries: Vec<f64>, representatives: Vec<f64>) -> Result<Self> {
        let s = representatives.len();
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if s < 3 || s.is_multiple_of(2) {
            return invalid(format!("state count must be odd and >= 3, got {s}"));
        }
        if boundaries.len() != s + 1 {
            return invalid(format!("expected {} boundaries, got {}", s + 1, boundaries.len()));
        }
        if boundaries.iter().chain(&representatives).any(|x| !x.is_finite()) {
            return invalid("non-finite bin value".into());
        }
        if !boundaries.windows(2).all(|w| w[0] < w[1]) {
            return invalid("boundaries must be strictly increasing".into());
        }
        for k in 0..=s {
            if (boundaries[k] + boundaries[s - k]).abs() > SYMMETRY_TOL {
                return invalid(format!("boundaries not symmetric at k={k}"));
            }
        }
        if !representatives.windows(2).all(|w| w[0] < w[1]) {
            return invalid("representatives must be strictly increasing".into());
        }
        for (k, &r) in representatives.iter().enumerate() {
            if Sign::of_state(k, s) != sign_of(r) {
                return invalid(format!("representative {r} has wrong sign for state {k}"));
            }
        }
        Ok(Self {
            boundaries,
            representatives,
        })
    }

    pub fn n_states(&self) -> usize {
        self.representatives.len()
    }

    pub fn center(&self) -> usize {
        self.n_states() / 2
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn representatives(&self) -> &[f64] {
        &self.representatives
    }

    pub fn squared_representatives(&self) -> Vec<f64> {
        self.representatives.iter().map(|r| r * r).collect()
    }

    /// Positive inner cut points, innermost first.
    fn positive_cuts(&self) -> &[f64] {
        let c = self.center();
        &self.boundaries[c + 1..self.n_states()]
    }

    /// Maps a return to its state. Values beyond the outer boundaries land
    /// in the extreme bins; the boolean reports whether that happened.
    pub fn state_of(&self, x: f64) -> (usize, bool) {
        let mag = x.abs();
        let level = self.positive_cuts().iter().filter(|&&c| mag > c).count();
        let clamped = mag > self.boundaries[self.n_states()];
        let c = self.center();
        let state = if x > 0.0 { c + level } else { c - level };
        (state, clamped)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn sign_of(x: f64) -> Sign {
    if x > 0.0 {
        Sign::Positive
    } else if x < 0.0 {
        Sign::Negative
    } else {
        Sign::Zero
    }
}

pub fn state_sign(state: usize, bins: &BinSpec) -> Sign {
    Sign::of_state(state, bins.n_states())
}

pub fn fit_return_bins(returns: &ReturnSeries, s: usize) -> Result<BinSpec> {
    fit_return_bins_with(returns, s, DEFAULT_CENTER_MASS)
}

/// Fits symmetric bins on the pooled magnitudes `|r|`.
///
/// The center bin `[-b, b]` holds about `center_mass` of the sample; each of
/// the `(s-1)/2` magnitude classes beyond it holds an equal share of the
/// rest. Cuts fall between distinct magnitudes, so tied values are never
/// split. Representatives are per-bin conditional means, with the center
/// pinned to zero.
pub fn fit_return_bins_with(returns: &ReturnSeries, s: usize, center_mass: f64) -> Result<BinSpec> {
    if s < 3 || s.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "state count must be odd and >= 3, got {s}"
        )));
    }
    if !(center_mass > 0.0 && center_mass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "center mass must lie in (0, 1), got {center_mass}"
        )));
    }
    let values = &returns.values;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateDistribution("non-finite return".into()));
    }
    let Some(&first) = values.first() else {
        return Err(Error::DegenerateDistribution("no returns".into()));
    };
    if values.iter().all(|&x| x == first) {
        return Err(Error::DegenerateDistribution("all returns are equal".into()));
    }

    let m = (s - 1) / 2;
    let mut magnitudes: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    magnitudes.sort_by(f64::total_cmp);
    let targets: Vec<f64> = (0..m)
        .map(|k| center_mass + (1.0 - center_mass) * k as f64 / m as f64)
        .collect();
    let cuts = select_cuts(&magnitudes, &targets).ok_or_else(|| {
        Error::DegenerateDistribution(format!(
            "need at least {} distinct return magnitudes for {s} states",
            m + 1
        ))
    })?;
    let outer = *magnitudes.last().expect("non-empty");

    let mut boundaries = Vec::with_capacity(s + 1);
    boundaries.push(-outer);
    boundaries.extend(cuts.iter().rev().map(|c| -c));
    boundaries.extend(cuts.iter().copied());
    boundaries.push(outer);

    // Provisional spec (representatives filled below) for bin assignment.
    let center = m;
    let mut sums = vec![0.0; s];
    let mut counts = vec![0usize; s];
    let provisional = BinSpec {
        boundaries: boundaries.clone(),
        representatives: vec![0.0; s],
    };
    for &x in values {
        let (k, _) = provisional.state_of(x);
        sums[k] += x;
        counts[k] += 1;
    }
    let mut representatives = vec![0.0; s];
    for k in 0..s {
        if k == center {
            continue;
        }
        let mirror = s - 1 - k;
        representatives[k] = if counts[k] > 0 {
            sums[k] / counts[k] as f64
        } else {
            -sums[mirror] / counts[mirror] as f64
        };
    }
    BinSpec::new(boundaries, representatives)
}

/// Maps every return to its state. Out-of-range returns are clamped to the
/// extreme bins and logged.
pub fn discretize(returns: &ReturnSeries, bins: &BinSpec) -> Result<StatePath> {
    let mut clamped = 0usize;
    let states: Vec<usize> = returns
        .values
        .iter()
        .map(|&x| {
            let (k, c) = bins.state_of(x);
            clamped += usize::from(c);
            k
        })
        .collect();
    if clamped > 0 {
        log::info!("discretize: {clamped} returns clamped to extreme bins");
    }
    StatePath::from_states(states, bins.n_states())
}
