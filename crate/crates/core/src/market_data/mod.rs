//! Tick ingestion, 1-minute resampling, simple returns and their symmetric
//! discretization into a finite state space.

mod bins;
mod grid;
mod path;

pub use bins::{
    discretize, fit_return_bins, fit_return_bins_with, state_sign, BinSpec, Sign,
    DEFAULT_CENTER_MASS,
};
pub use grid::{
    align_price_series, compute_returns, resample_to_grid, PriceSeries, ReturnSeries, Tick,
    TickSeries,
};
pub use path::{StatePath, Transition};
