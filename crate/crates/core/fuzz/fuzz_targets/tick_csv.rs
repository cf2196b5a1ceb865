#![no_main]

use libfuzzer_sys::fuzz_target;
use wismc::market_data::{compute_returns, resample_to_grid, TickSeries};

fuzz_target!(|data: &[u8]| {
    let Ok(ticks) = TickSeries::from_csv_reader("F", data) else { return };
    // Wide grids are legal but slow; the cap is checked before allocating.
    if let Ok(prices) = resample_to_grid(&ticks, 60) {
        let _ = compute_returns(&prices);
    }
});
