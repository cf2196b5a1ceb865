//! Validation statistics: autocorrelation of returns and squared returns,
//! contemporaneous cross-correlation, and real-versus-synthetic reports.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;

/// Pairs whose real correlation is below this in magnitude carry no ratio.
pub const NOISE_FLOOR: f64 = 0.02;

/// Autocorrelation `Sigma(tau)` for `tau = 0..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfReport {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub n_obs: usize,
}

impl AcfReport {
    pub fn at(&self, lag: usize) -> Option<f64> {
        self.values.get(lag).copied()
    }
}

/// Shared-mean sample autocorrelation: every lag uses the full-sample mean
/// and the full-sample variance, each normalized by `n`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<AcfReport> {
    let n = x.len();
    if n <= max_lag {
        return Err(Error::TooShort {
            needed: max_lag + 1,
            got: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("series contains non-finite values".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateVariance("series is constant".into()));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|d| d * d).sum::<f64>();
    if !(var > 0.0) {
        return Err(Error::DegenerateVariance("series has zero variance".into()));
    }
    let values = (0..=max_lag)
        .map(|tau| {
            if tau == 0 {
                return 1.0;
            }
            let cov: f64 = centered[..n - tau].iter().zip(&centered[tau..]).map(|(a, b)| a * b).sum();
            cov / var
        })
        .collect();
    Ok(AcfReport {
        lags: (0..=max_lag).collect(),
        values,
        n_obs: n,
    })
}

/// Autocorrelation of `R^2`.
pub fn acf_squared(returns: &ReturnSeries, max_lag: usize) -> Result<AcfReport> {
    let sq: Vec<f64> = returns.values.iter().map(|r| r * r).collect();
    autocorrelation(&sq, max_lag)
}

/// Autocorrelation of `R`.
pub fn acf_returns(returns: &ReturnSeries, max_lag: usize) -> Result<AcfReport> {
    autocorrelation(&returns.values, max_lag)
}

/// L2 distance between two ACF curves over lags `1..=max_lag`.
pub fn acf_distance(a: &AcfReport, b: &AcfReport, max_lag: usize) -> Result<f64> {
    if a.values.len() <= max_lag || b.values.len() <= max_lag {
        return Err(Error::TooShort {
            needed: max_lag + 1,
            got: a.values.len().min(b.values.len()),
        });
    }
    Ok((1..=max_lag)
        .map(|k| (a.values[k] - b.values[k]).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Pearson correlation of contemporaneous values.
pub fn cross_correlation(a: &ReturnSeries, b: &ReturnSeries) -> Result<f64> {
    let (x, y) = (&a.values, &b.values);
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!("series lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: x.len() });
    }
    for (name, v) in [("first", x), ("second", y)] {
        if v.iter().all(|&e| e == v[0]) {
            return Err(Error::DegenerateVariance(format!("{name} series is constant")));
        }
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::DegenerateVariance("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Lower triangle of a symmetric correlation matrix without its diagonal,
/// row-major: `(1,0), (2,0), (2,1), (3,0), ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrMatrix {
    pub symbols: Vec<String>,
    pub values: Vec<f64>,
}

impl CrossCorrMatrix {
    pub fn new(symbols: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = symbols.len();
        if n < 2 {
            return Err(Error::InvalidParameter("a correlation matrix needs at least 2 symbols".into()));
        }
        if values.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "{n} symbols need {} entries, got {}",
                n * (n - 1) / 2,
                values.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = symbols.iter().find(|s| !seen.insert(s.as_str())) {
            return Err(Error::SymbolMismatch(format!("duplicate symbol {dup}")));
        }
        Ok(Self { symbols, values })
    }

    fn offset(row: usize, col: usize) -> usize {
        row * (row - 1) / 2 + col
    }

    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.position(a)?, self.position(b)?);
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Some(1.0),
            std::cmp::Ordering::Greater => Some(self.values[Self::offset(i, j)]),
            std::cmp::Ordering::Less => Some(self.values[Self::offset(j, i)]),
        }
    }

    /// `(row symbol, column symbol, value)` in storage order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        (1..self.symbols.len()).flat_map(move |i| {
            (0..i).map(move |j| (self.symbols[i].as_str(), self.symbols[j].as_str(), self.values[Self::offset(i, j)]))
        })
    }
}

/// Every pairwise correlation, in input order.
pub fn corr_matrix(series: &[(String, ReturnSeries)]) -> Result<CrossCorrMatrix> {
    if series.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 series".into()));
    }
    let mut values = Vec::with_capacity(series.len() * (series.len() - 1) / 2);
    for i in 1..series.len() {
        for j in 0..i {
            let label = format!("{}-{}", series[i].0, series[j].0);
            let c = cross_correlation(&series[i].1, &series[j].1).map_err(|e| match e {
                Error::GridMismatch(m) => Error::GridMismatch(format!("{label}: {m}")),
                Error::DegenerateVariance(m) => Error::DegenerateVariance(format!("{label}: {m}")),
                Error::TooShort { .. } => Error::InvalidParameter(format!("{label}: {e}")),
                other => other,
            })?;
            values.push(c);
        }
    }
    CrossCorrMatrix::new(series.iter().map(|(s, _)| s.clone()).collect(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub symbol_a: String,
    pub symbol_b: String,
    pub real: f64,
    pub synth: f64,
    /// `synth / real`; absent below the noise floor.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub pairs: Vec<PairRatio>,
    pub median: Option<f64>,
    pub noise_floor: f64,
}

/// Per-pair `synth / real` in the real matrix's order, and their median.
pub fn reproduction_ratio(real: &CrossCorrMatrix, synth: &CrossCorrMatrix) -> Result<RatioReport> {
    let mut a: Vec<&String> = real.symbols.iter().collect();
    let mut b: Vec<&String> = synth.symbols.iter().collect();
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::SymbolMismatch(format!(
            "real has [{}], synthetic has [{}]",
            real.symbols.join(", "),
            synth.symbols.join(", ")
        )));
    }
    let pairs: Vec<PairRatio> = real
        .pairs()
        .map(|(x, y, r)| {
            let s = synth.get(x, y).expect("symbol sets match");
            PairRatio {
                symbol_a: x.to_string(),
                symbol_b: y.to_string(),
                real: r,
                synth: s,
                ratio: (r.abs() >= NOISE_FLOOR).then(|| s / r),
            }
        })
        .collect();
    let ratios: Vec<f64> = pairs.iter().filter_map(|p| p.ratio).collect();
    Ok(RatioReport {
        median: median(&ratios),
        pairs,
        noise_floor: NOISE_FLOOR,
    })
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Lower-triangular text table with values multiplied by 100 and rounded;
/// the column labels run along the bottom.
pub fn render_table(m: &CrossCorrMatrix) -> String {
    let n = m.symbols.len();
    let label_w = m.symbols.iter().map(|s| s.len()).max().unwrap_or(0);
    let cell_w = m.symbols[..n - 1]
        .iter()
        .map(|s| s.len())
        .chain(m.values.iter().map(|v| format!("{}", (v * 100.0).round() as i64).len()))
        .max()
        .unwrap_or(1)
        + 1;
    let mut out = String::new();
    for i in 1..n {
        let _ = write!(out, "{:<label_w$} |", m.symbols[i]);
        for j in 0..i {
            let v = m.values[CrossCorrMatrix::offset(i, j)];
            let _ = write!(out, "{:>cell_w$}", (v * 100.0).round() as i64);
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<label_w$} +", "");
    out.push_str(&"-".repeat(cell_w * (n - 1)));
    out.push('\n');
    let _ = write!(out, "{:<label_w$}  ", "");
    for s in &m.symbols[..n - 1] {
        let _ = write!(out, "{s:>cell_w$}");
    }
    out.push('\n');
    out
}

/// Mann-Kendall trend test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannKendall {
    pub s: i64,
    pub z: f64,
    /// Two-sided p-value under the normal approximation.
    pub p_value: f64,
}

/// Kendall's `S` against time, with the tie-corrected variance and a
/// continuity-corrected normal score. Needs at least 3 values.
pub fn mann_kendall(x: &[f64]) -> Result<MannKendall> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += match x[j].partial_cmp(&x[i]) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    let mut ties: HashMap<u64, u64> = HashMap::new();
    for v in x {
        *ties.entry(v.to_bits()).or_default() += 1;
    }
    let nf = n as f64;
    let tie_term: f64 = ties
        .values()
        .filter(|&&t| t > 1)
        .map(|&t| {
            let t = t as f64;
            t * (t - 1.0) * (2.0 * t + 5.0)
        })
        .sum();
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = if s > 0 {
        (s as f64 - 1.0) / var.sqrt()
    } else if s < 0 {
        (s as f64 + 1.0) / var.sqrt()
    } else {
        0.0
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    Ok(MannKendall { s, z, p_value })
}
