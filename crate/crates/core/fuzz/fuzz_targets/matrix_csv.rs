#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::artifact::{read_matrix_csv, write_matrix_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(m) = read_matrix_csv(data) else { return };
    let mut out = Vec::new();
    write_matrix_csv(&mut out, &m).unwrap();
    assert_eq!(read_matrix_csv(out.as_slice()).unwrap().symbols, m.symbols);
});
