//! Forecasting baselines, Granger and forecaster-residual causality tests,
//! and synthetic ground-truth benchmarks for multivariate time series.
//!
//! - [`series`]: series containers, scaling, splitting, seeded randomness, CSV.
//! - [`synthgen`]: coupled logistic maps and multivariate Ornstein–Uhlenbeck panels with known graphs.
//! - [`stats`]: least squares, correlation, distribution tails, Benjamini–Hochberg.
//! - [`forecast`]: naive, lagged-regression, ARIMA and ETS forecasters plus an external process bridge.
//! - [`causality`]: pairwise tests and panel-wide graph inference.
//! - [`eval`]: scoring, experiment sweeps and reports.

pub mod causality;
pub mod eval;
pub mod forecast;
pub mod series;
pub mod stats;
pub mod synthgen;
