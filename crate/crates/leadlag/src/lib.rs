//! Detection of statistically validated lead-lag dependencies between
//! financial return time series.
//!
//! The pipeline: ingest prices, compute intraday log returns, build
//! lag-aligned pair matrices that never cross trading-day boundaries,
//! discretize returns into equal-population quantile bins, score every
//! ordered pair of assets with plug-in mutual information, and validate
//! links against an analytic Gamma null (or shuffling surrogates) under
//! Bonferroni or FDR multiple-testing correction. Mutual information
//! picks up non-linear dependencies that the lagged Pearson baseline
//! misses.

pub mod analysis;
pub mod error;
pub mod export;
pub mod inference;
pub mod infotheory;
pub mod marketdata;
pub mod nullmodels;
pub mod special;
pub mod symbolize;
pub mod synth;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
