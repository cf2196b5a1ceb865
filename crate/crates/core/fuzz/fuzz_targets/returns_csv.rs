#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::artifact::read_returns_csv;
use wismc::market_data::fit_return_bins;

fuzz_target!(|data: &[u8]| {
    if let Ok(returns) = read_returns_csv(data) {
        let _ = fit_return_bins(&returns, 5);
    }
});
