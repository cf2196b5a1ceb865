//! The checked-in fuzz seeds must stay valid inputs, otherwise the fuzzers
//! start from nothing.

use std::fs;
use std::path::PathBuf;

use wismc::artifact::{read_follower_artifact, read_kernel_artifact, read_matrix_csv, read_returns_csv, read_synthetic_csv};
use wismc::market_data::{BinSpec, TickSeries};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn every_seed_parses() {
    for (p, b) in seeds("tick_csv") {
        TickSeries::from_csv_reader("F", b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("returns_csv") {
        read_returns_csv(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("synthetic_csv") {
        let n_states = 3 + 2 * usize::from(b[0] % 4);
        read_synthetic_csv(&b[1..], n_states).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("matrix_csv") {
        read_matrix_csv(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("bin_spec_json") {
        BinSpec::from_json(std::str::from_utf8(&b).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("kernel_artifact") {
        read_kernel_artifact(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("follower_artifact") {
        read_follower_artifact(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
