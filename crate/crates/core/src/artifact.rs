//! On-disk formats.
//!
//! Model artifacts are a magic tag, a little-endian `u64` length, a JSON
//! envelope of that length, and a flat block of little-endian `f64`s:
//!
//! * kernel (`WISMCK01`): cumulative kernel `Q_ij(v; t)` ordered
//!   `(i, v, j, t)`, `t` fastest;
//! * follower (`WISMCF01`): one row `[stay, change_0, .., change_{s-1}]`
//!   per context, in the envelope's context order.
//!
//! Both envelopes embed the return bins, index spec and index bins the
//! model was estimated with. Series are CSV: returns as
//! `minute,timestamp_ms,return`, synthetic paths as `minute,state,return`
//! (1-based states), correlation matrices as `symbol_a,symbol_b,value`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{ContextRow, FollowerContext, FollowerIndexAt, FollowerKernel};
use crate::index_process::{IndexBins, IndexSpec};
use crate::market_data::{BinSpec, PriceSeries, ReturnSeries, Sign, StatePath};
use crate::semimarkov::{IndexedKernel, OneStepDist};
use crate::statistics::CrossCorrMatrix;

pub const KERNEL_MAGIC: &[u8; 8] = b"WISMCK01";
pub const FOLLOWER_MAGIC: &[u8; 8] = b"WISMCF01";

/// Upper bound on an envelope, so a corrupt length cannot force a huge read.
const MAX_ENVELOPE: u64 = 1 << 30;

/// Provenance shared by all model artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub symbol: String,
    /// Hash of the model-defining configuration.
    pub config_hash: String,
    /// Minutes of data the model was estimated from.
    pub sample_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelArtifact {
    pub meta: ArtifactMeta,
    pub bins: BinSpec,
    pub index: IndexSpec,
    pub index_bins: IndexBins,
    pub kernel: IndexedKernel,
}

#[derive(Serialize, Deserialize)]
struct KernelEnvelope {
    #[serde(flatten)]
    meta: ArtifactMeta,
    s: usize,
    levels: usize,
    t_max: usize,
    lambda: f64,
    bin_spec: BinSpec,
    index_spec: IndexSpec,
    index_bins: IndexBins,
    support: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerArtifact {
    pub meta: ArtifactMeta,
    pub leader_symbol: String,
    pub bins: BinSpec,
    pub index: IndexSpec,
    pub index_bins: IndexBins,
    pub kernel: FollowerKernel,
}

#[derive(Serialize, Deserialize)]
struct ContextEntry {
    i: usize,
    u: usize,
    v: usize,
    sign: Sign,
    support: u64,
}

#[derive(Serialize, Deserialize)]
struct FollowerEnvelope {
    #[serde(flatten)]
    meta: ArtifactMeta,
    leader_symbol: String,
    s: usize,
    levels: usize,
    t_max: usize,
    lambda: f64,
    index_at: FollowerIndexAt,
    bin_spec: BinSpec,
    index_spec: IndexSpec,
    index_bins: IndexBins,
    contexts: Vec<ContextEntry>,
}

fn write_container<W: Write>(mut w: W, magic: &[u8; 8], envelope: &[u8], payload: &[f64]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&(envelope.len() as u64).to_le_bytes())?;
    w.write_all(envelope)?;
    let mut buf = Vec::with_capacity(payload.len() * 8);
    for x in payload {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Splits a container into its envelope bytes and payload values.
fn read_container<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<(&'a [u8], Vec<f64>)> {
    let bad = |m: &str| Error::Artifact(m.to_string());
    if bytes.len() < 16 {
        return Err(bad("file too short for header"));
    }
    if &bytes[..8] != magic {
        return Err(bad("wrong magic tag"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if len > MAX_ENVELOPE || len > (bytes.len() - 16) as u64 {
        return Err(bad("envelope length exceeds file"));
    }
    let end = 16 + len as usize;
    let payload = &bytes[end..];
    if !payload.len().is_multiple_of(8) {
        return Err(bad("payload is not a whole number of f64 values"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((&bytes[16..end], values))
}

fn check_embedded(s: usize, levels: usize, lambda: f64, bins: &BinSpec, spec: &IndexSpec, ib: &IndexBins) -> Result<()> {
    spec.validate()?;
    if bins.n_states() != s || spec.n_states() != s {
        return Err(Error::Artifact(format!(
            "embedded specs describe {} / {} states, envelope {s}",
            bins.n_states(),
            spec.n_states()
        )));
    }
    if ib.levels() != levels {
        return Err(Error::Artifact(format!("index bins have {} levels, envelope {levels}", ib.levels())));
    }
    if lambda.to_bits() != spec.lambda.to_bits() {
        return Err(Error::Artifact("lambda disagrees with the index spec".into()));
    }
    Ok(())
}

pub fn write_kernel_artifact<W: Write>(w: W, a: &KernelArtifact) -> Result<()> {
    let env = KernelEnvelope {
        meta: a.meta.clone(),
        s: a.kernel.n_states(),
        levels: a.kernel.levels(),
        t_max: a.kernel.t_max(),
        lambda: a.index.lambda,
        bin_spec: a.bins.clone(),
        index_spec: a.index.clone(),
        index_bins: a.index_bins.clone(),
        support: a.kernel.supports().to_vec(),
    };
    let json = serde_json::to_vec(&env)?;
    write_container(w, KERNEL_MAGIC, &json, a.kernel.cumulative_values())
}

pub fn read_kernel_artifact(bytes: &[u8]) -> Result<KernelArtifact> {
    let (json, payload) = read_container(bytes, KERNEL_MAGIC)?;
    let env: KernelEnvelope = serde_json::from_slice(json)?;
    check_embedded(env.s, env.levels, env.lambda, &env.bin_spec, &env.index_spec, &env.index_bins)?;
    let expected = env
        .s
        .checked_mul(env.levels)
        .and_then(|x| x.checked_mul(env.s))
        .and_then(|x| x.checked_mul(env.t_max));
    if expected != Some(payload.len()) {
        return Err(Error::Artifact(format!(
            "payload holds {} values, envelope implies {expected:?}",
            payload.len()
        )));
    }
    let kernel = IndexedKernel::from_cumulative(env.s, env.levels, env.t_max, payload, env.support)?;
    Ok(KernelArtifact {
        meta: env.meta,
        bins: env.bin_spec,
        index: env.index_spec,
        index_bins: env.index_bins,
        kernel,
    })
}

pub fn write_follower_artifact<W: Write>(w: W, a: &FollowerArtifact) -> Result<()> {
    let k = &a.kernel;
    let mut contexts = Vec::with_capacity(k.rows().len());
    let mut payload = Vec::with_capacity(k.rows().len() * (k.n_states() + 1));
    for (ctx, row) in k.rows() {
        contexts.push(ContextEntry {
            i: ctx.i,
            u: ctx.u,
            v: ctx.v,
            sign: ctx.sign,
            support: row.support,
        });
        payload.push(row.probs.stay_prob);
        payload.extend_from_slice(&row.probs.change_probs);
    }
    let env = FollowerEnvelope {
        meta: a.meta.clone(),
        leader_symbol: a.leader_symbol.clone(),
        s: k.n_states(),
        levels: k.levels(),
        t_max: k.t_max(),
        lambda: a.index.lambda,
        index_at: k.index_at(),
        bin_spec: a.bins.clone(),
        index_spec: a.index.clone(),
        index_bins: a.index_bins.clone(),
        contexts,
    };
    let json = serde_json::to_vec(&env)?;
    write_container(w, FOLLOWER_MAGIC, &json, &payload)
}

pub fn read_follower_artifact(bytes: &[u8]) -> Result<FollowerArtifact> {
    let (json, payload) = read_container(bytes, FOLLOWER_MAGIC)?;
    let env: FollowerEnvelope = serde_json::from_slice(json)?;
    check_embedded(env.s, env.levels, env.lambda, &env.bin_spec, &env.index_spec, &env.index_bins)?;
    let width = env.s + 1;
    if env.contexts.len().checked_mul(width) != Some(payload.len()) {
        return Err(Error::Artifact(format!(
            "payload holds {} values for {} contexts of width {width}",
            payload.len(),
            env.contexts.len()
        )));
    }
    let mut rows = BTreeMap::new();
    for (entry, row) in env.contexts.iter().zip(payload.chunks_exact(width)) {
        let ctx = FollowerContext {
            i: entry.i,
            u: entry.u,
            v: entry.v,
            sign: entry.sign,
        };
        let probs = OneStepDist {
            stay_prob: row[0],
            change_probs: row[1..].to_vec(),
        };
        if rows.insert(ctx, ContextRow { support: entry.support, probs }).is_some() {
            return Err(Error::Artifact(format!("duplicate context {ctx:?}")));
        }
    }
    let kernel = FollowerKernel::from_rows(env.s, env.levels, env.t_max, env.index_at, rows)?;
    Ok(FollowerArtifact {
        meta: env.meta,
        leader_symbol: env.leader_symbol,
        bins: env.bin_spec,
        index: env.index_spec,
        index_bins: env.index_bins,
        kernel,
    })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Writes a gridded return series; `prices` supplies the timestamps.
pub fn write_returns_csv<W: Write>(w: W, prices: &PriceSeries, returns: &ReturnSeries) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["minute", "timestamp_ms", "return"]).map_err(csv_err)?;
    for (t, r) in returns.values.iter().enumerate() {
        wr.write_record([t.to_string(), prices.slot_start_ms(t).to_string(), r.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes a gridded price series as `timestamp_ms,price`.
pub fn write_prices_csv<W: Write>(w: W, prices: &PriceSeries) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["timestamp_ms", "price"]).map_err(csv_err)?;
    for (t, p) in prices.prices.iter().enumerate() {
        wr.write_record([prices.slot_start_ms(t).to_string(), p.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the `return` column of any CSV that has one, in row order.
pub fn read_returns_csv<R: Read>(r: R) -> Result<ReturnSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = headers.iter().position(|h| h == "return").ok_or_else(|| Error::Parse {
        line: 1,
        message: "no `return` column".into(),
    })?;
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        let field = rec.get(col).ok_or_else(|| Error::Parse {
            line,
            message: "missing `return` field".into(),
        })?;
        let x: f64 = field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad return {field:?}"),
        })?;
        if !x.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite return {field:?}"),
            });
        }
        values.push(x);
    }
    Ok(ReturnSeries::new(values))
}

/// Writes a synthetic path as `minute,state,return` with 1-based states.
pub fn write_synthetic_csv<W: Write>(w: W, path: &StatePath, bins: &BinSpec) -> Result<()> {
    let reps = bins.representatives();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["minute", "state", "return"]).map_err(csv_err)?;
    for (t, &k) in path.states().iter().enumerate() {
        wr.write_record([t.to_string(), (k + 1).to_string(), reps[k].to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a synthetic path back, checking minutes are consecutive and
/// states lie in `1..=n_states`.
pub fn read_synthetic_csv<R: Read>(r: R, n_states: usize) -> Result<(StatePath, ReturnSeries)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["minute", "state", "return"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `minute,state,return`".into(),
        });
    }
    let mut states = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        let parse_err = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        if rec.len() != 3 {
            return Err(parse_err("field count"));
        }
        let minute: usize = rec[0].parse().map_err(|_| parse_err("minute"))?;
        let state: usize = rec[1].parse().map_err(|_| parse_err("state"))?;
        let ret: f64 = rec[2].parse().map_err(|_| parse_err("return"))?;
        if minute != row {
            return Err(parse_err("minute sequence"));
        }
        if state == 0 || state > n_states || !ret.is_finite() {
            return Err(parse_err("state or return value"));
        }
        states.push(state - 1);
        values.push(ret);
    }
    Ok((StatePath::from_states(states, n_states)?, ReturnSeries::new(values)))
}

/// Reads a long-form matrix `symbol_a,symbol_b,value`. Symbols are ordered
/// by first appearance, column symbol before row symbol; every pair must
/// appear exactly once.
pub fn read_matrix_csv<R: Read>(r: R) -> Result<CrossCorrMatrix> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["symbol_a", "symbol_b", "value"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `symbol_a,symbol_b,value`".into(),
        });
    }
    let mut symbols: Vec<String> = Vec::new();
    let mut entries = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 || rec[0].is_empty() || rec[1].is_empty() || rec[0] == rec[1] {
            return Err(Error::Parse {
                line,
                message: "expected two distinct symbols and a value".into(),
            });
        }
        let value: f64 = rec[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad value {:?}", &rec[2]),
        })?;
        if !(-1.0..=1.0).contains(&value) {
            return Err(Error::Parse {
                line,
                message: format!("correlation {value} outside [-1, 1]"),
            });
        }
        for s in [&rec[1], &rec[0]] {
            if !symbols.iter().any(|x| x == s) {
                symbols.push(s.to_string());
            }
        }
        entries.push((rec[0].to_string(), rec[1].to_string(), value, line));
    }
    let n = symbols.len();
    if n < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "matrix needs at least one pair".into(),
        });
    }
    let mut values = vec![None; n * (n - 1) / 2];
    for (a, b, value, line) in entries {
        let i = symbols.iter().position(|s| *s == a).expect("registered");
        let j = symbols.iter().position(|s| *s == b).expect("registered");
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        let slot = &mut values[hi * (hi - 1) / 2 + lo];
        if slot.replace(value).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate pair {a},{b}"),
            });
        }
    }
    let values = values
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::SymbolMismatch("matrix is missing pairs".into()))?;
    CrossCorrMatrix::new(symbols, values)
}

pub fn write_matrix_csv<W: Write>(w: W, m: &CrossCorrMatrix) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["symbol_a", "symbol_b", "value"]).map_err(csv_err)?;
    for (a, b, v) in m.pairs() {
        wr.write_record([a, b, &v.to_string()]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
