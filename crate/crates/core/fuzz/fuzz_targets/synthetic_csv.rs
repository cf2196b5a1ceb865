#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::artifact::read_synthetic_csv;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let n_states = 3 + 2 * usize::from(n % 4);
    if let Ok((path, returns)) = read_synthetic_csv(rest, n_states) {
        assert_eq!(path.len(), returns.len());
        assert!(path.states().iter().all(|&s| s < n_states));
    }
});
