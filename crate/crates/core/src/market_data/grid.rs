use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timestamps at or above this magnitude are read as epoch milliseconds.
const MILLIS_THRESHOLD: i64 = 100_000_000_000;

/// Upper bound on grid length (about 95 years of minutes).
const MAX_SLOTS: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    /// Epoch milliseconds.
    pub timestamp_ms: i64,
    pub price: f64,
}

/// Tick-level prices of a single symbol, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct TickSeries {
    symbol: String,
    ticks: Vec<Tick>,
}

impl TickSeries {
    pub fn new(symbol: impl Into<String>, ticks: Vec<Tick>) -> Result<Self> {
        if ticks.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (index, pair) in ticks.windows(2).enumerate() {
            if pair[1].timestamp_ms < pair[0].timestamp_ms {
                return Err(Error::UnsortedInput {
                    index: index + 1,
                    prev: pair[0].timestamp_ms,
                    next: pair[1].timestamp_ms,
                });
            }
        }
        if let Some(bad) = ticks.iter().find(|t| !(t.price > 0.0 && t.price.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "non-positive price {} at {}",
                bad.price, bad.timestamp_ms
            )));
        }
        Ok(Self {
            symbol: symbol.into(),
            ticks,
        })
    }

    /// Parses a `timestamp,price` CSV. Timestamps are integer epoch seconds
    /// or milliseconds; the unit is detected from the largest magnitude.
    pub fn from_csv_reader<R: std::io::Read>(symbol: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(1, e))?.clone();
        if headers.len() < 2
            || !headers[0].eq_ignore_ascii_case("timestamp")
            || !headers[1].eq_ignore_ascii_case("price")
        {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `timestamp,price`".into(),
            });
        }

        let mut raw = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| csv_error(line, e))?;
            if record.len() < 2 {
                return Err(Error::Parse {
                    line,
                    message: "expected two fields".into(),
                });
            }
            let ts: i64 = record[0].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad timestamp {:?}", &record[0]),
            })?;
            let price: f64 = record[1].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad price {:?}", &record[1]),
            })?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: format!("price must be positive, got {price}"),
                });
            }
            raw.push((ts, price));
        }

        let max_abs = raw.iter().map(|(ts, _)| ts.unsigned_abs()).max().unwrap_or(0);
        let scale = if max_abs >= MILLIS_THRESHOLD as u64 { 1 } else { 1000 };
        let ticks = raw
            .into_iter()
            .map(|(ts, price)| Tick {
                timestamp_ms: ts * scale,
                price,
            })
            .collect();
        Self::new(symbol, ticks)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }
}

fn csv_error(line: usize, e: csv::Error) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Prices on a regular time grid, one per slot, with no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    /// Start of the first slot, epoch milliseconds.
    pub t0_ms: i64,
    pub interval_secs: u32,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn interval_ms(&self) -> i64 {
        i64::from(self.interval_secs) * 1000
    }

    pub fn slot_start_ms(&self, slot: usize) -> i64 {
        self.t0_ms + slot as i64 * self.interval_ms()
    }

    /// One tick per slot at the slot start.
    pub fn to_ticks(&self, symbol: &str) -> Result<TickSeries> {
        let ticks = self
            .prices
            .iter()
            .enumerate()
            .map(|(k, &price)| Tick {
                timestamp_ms: self.slot_start_ms(k),
                price,
            })
            .collect();
        TickSeries::new(symbol, ticks)
    }
}

/// Last-price resampling onto an epoch-aligned grid of `interval_secs` slots.
///
/// Slot `k` covers `[k*interval, (k+1)*interval)`. Slots before the first
/// tick are dropped; empty interior slots repeat the previous price.
pub fn resample_to_grid(ticks: &TickSeries, interval_secs: u32) -> Result<PriceSeries> {
    if interval_secs == 0 {
        return Err(Error::InvalidParameter("interval must be positive".into()));
    }
    let interval_ms = i64::from(interval_secs) * 1000;
    let records = ticks.ticks();
    let first = records.first().ok_or(Error::EmptySeries)?;
    let last = records.last().ok_or(Error::EmptySeries)?;
    let first_slot = first.timestamp_ms.div_euclid(interval_ms);
    let last_slot = last.timestamp_ms.div_euclid(interval_ms);
    let n_slots = usize::try_from(last_slot - first_slot + 1)
        .ok()
        .filter(|&n| n <= MAX_SLOTS)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("grid spans more than {MAX_SLOTS} slots"))
        })?;

    let mut prices = Vec::with_capacity(n_slots);
    let mut current = first.price;
    let mut cursor = 0usize;
    for slot in first_slot..=last_slot {
        while cursor < records.len() && records[cursor].timestamp_ms.div_euclid(interval_ms) == slot {
            current = records[cursor].price;
            cursor += 1;
        }
        prices.push(current);
    }
    Ok(PriceSeries {
        t0_ms: first_slot * interval_ms,
        interval_secs,
        prices,
    })
}

/// Trims every series to the slots common to all of them.
pub fn align_price_series(series: &mut [PriceSeries]) -> Result<()> {
    let Some(first) = series.first() else {
        return Ok(());
    };
    let interval = first.interval_secs;
    if let Some(bad) = series.iter().find(|s| s.interval_secs != interval) {
        return Err(Error::GridMismatch(format!(
            "intervals differ: {}s vs {}s",
            interval, bad.interval_secs
        )));
    }
    let start = series.iter().map(|s| s.t0_ms).max().unwrap_or(0);
    let end = series
        .iter()
        .map(|s| s.slot_start_ms(s.len().saturating_sub(1)))
        .min()
        .unwrap_or(0);
    if end < start {
        return Err(Error::GridMismatch("series do not overlap in time".into()));
    }
    let interval_ms = i64::from(interval) * 1000;
    for s in series.iter_mut() {
        let skip = ((start - s.t0_ms) / interval_ms) as usize;
        let keep = ((end - start) / interval_ms) as usize + 1;
        s.prices = s.prices[skip..skip + keep].to_vec();
        s.t0_ms = start;
    }
    Ok(())
}

/// Simple returns `(p[t+1] - p[t]) / p[t]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    if prices.prices.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidParameter("prices must be positive".into()));
    }
    let values = prices
        .prices
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    Ok(ReturnSeries { values })
}
