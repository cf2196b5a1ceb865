//! Weighted-indexed semi-Markov chain (WISMC) models of high-frequency
//! returns.
//!
//! The pipeline runs tick prices through [`market_data`] (1-minute grid,
//! returns, symmetric discretization), builds the EWMA volatility index in
//! [`index_process`], estimates the indexed kernel and the follower's
//! sign-conditioned law in [`estimation`], generates synthetic paths in
//! [`simulation`], and compares real and synthetic series with the
//! statistics in [`statistics`]. [`artifact`] holds the on-disk formats.

pub mod artifact;
pub mod error;
pub mod estimation;
pub mod index_process;
pub mod market_data;
pub mod semimarkov;
pub mod simulation;
pub mod statistics;

mod quantile;

pub use error::{Error, Result};
