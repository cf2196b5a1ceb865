#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::market_data::BinSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = BinSpec::from_json(text) else { return };
    for x in [-1.0, -1e-4, 0.0, 1e-4, 1.0] {
        let (state, _) = spec.state_of(x);
        assert!(state < spec.n_states());
    }
});
