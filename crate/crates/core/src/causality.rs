//! Pairwise directed causality tests and whole-panel graph inference.
//!
//! Two tests share the same lag-sweep and FDR machinery:
//!
//! * **Granger**: for each order `p ≤ max_lag`, an OLS autoregression of `Y`
//!   on its own `p` lags (restricted) is compared against one that adds `p`
//!   lags of `X` (full) with `F = ((RSS_r − RSS_f)/p) / (RSS_f/(n − 2p − 1))`.
//! * **Residual**: a forecaster predicts `Y_t` from the previous `w` points;
//!   for each lag `ℓ` the residuals `r_{t+ℓ}` are correlated with `X_t`, the
//!   correlation is tested with `t = ρ·√((n−2)/(1−ρ²))`, and the simple
//!   regression `r_{t+ℓ} = δ + θ·X_t + η_t` supplies `R²` and the sign.
//!
//! The per-lag p-values are Benjamini–Hochberg adjusted, either within each
//! ordered pair or across the whole panel, and the lag with the smallest
//! adjusted p-value (smallest lag on ties) is reported.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{self, ForecastError, Forecaster, ForecasterSpec, Rolling};
use crate::series::{MultiSeries, TimeSeries};
use crate::stats::{self, Design, StatsError};
use crate::synthgen::{CausalGraph, Sign};

#[derive(Debug, Error)]
pub enum CausalityError {
    #[error("invalid causality configuration: {0}")]
    InvalidConfig(String),
    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{method} test needs more than {need} points, got {got}")]
    TooShort { method: &'static str, need: usize, got: usize },
    #[error("panel needs at least 2 series")]
    TooFewSeries,
    #[error("pair {source_name} -> {target_name}: {error}")]
    Pair {
        source_name: String,
        target_name: String,
        #[source]
        error: Box<CausalityError>,
    },
    #[error("target {target_name}: {error}")]
    Residuals {
        target_name: String,
        #[source]
        error: ForecastError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Granger,
    Residual,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Granger => "granger",
            Method::Residual => "residual",
        }
    }
}

/// Which p-values form one Benjamini–Hochberg family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BhScope {
    /// The `max_lag` p-values of one ordered pair.
    #[default]
    PerPair,
    /// All `N(N−1)·max_lag` p-values of the panel.
    PerPanel,
}

/// Lag orders examined by the Granger test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrangerOrder {
    /// Every order `1..=max_lag`.
    #[default]
    Sweep,
    /// A single order.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CausalityConfig {
    pub method: Method,
    pub alpha: f64,
    pub max_lag: usize,
    pub context_w: usize,
    pub granger_order: GrangerOrder,
    pub bh_family: BhScope,
    /// Forecaster whose residuals are tested (residual method only).
    pub forecaster: ForecasterSpec,
}

impl Default for CausalityConfig {
    fn default() -> Self {
        Self {
            method: Method::Granger,
            alpha: 0.05,
            max_lag: 5,
            context_w: 30,
            granger_order: GrangerOrder::Sweep,
            bh_family: BhScope::PerPair,
            forecaster: ForecasterSpec::ar(5),
        }
    }
}

impl CausalityConfig {
    pub fn granger() -> Self {
        Self::default()
    }

    pub fn residual(forecaster: ForecasterSpec) -> Self {
        Self { method: Method::Residual, forecaster, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CausalityError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CausalityError::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.max_lag == 0 {
            return Err(CausalityError::InvalidConfig("max_lag must be >= 1".into()));
        }
        if let GrangerOrder::Fixed(p) = self.granger_order {
            if p == 0 || p > self.max_lag {
                return Err(CausalityError::InvalidConfig(format!("fixed order {p} outside [1, {}]", self.max_lag)));
            }
        }
        if self.method == Method::Residual {
            if self.max_lag >= self.context_w {
                return Err(CausalityError::InvalidConfig(format!(
                    "max_lag {} must be below the context window {}",
                    self.max_lag, self.context_w
                )));
            }
            self.forecaster.validate()?;
            if self.context_w < self.forecaster.min_history() {
                return Err(CausalityError::InvalidConfig(format!(
                    "context window {} is shorter than {} needs ({})",
                    self.context_w,
                    self.forecaster.label(),
                    self.forecaster.min_history()
                )));
            }
        }
        Ok(())
    }

    fn lags(&self) -> Vec<usize> {
        match (self.method, self.granger_order) {
            (Method::Granger, GrangerOrder::Fixed(p)) => vec![p],
            _ => (1..=self.max_lag).collect(),
        }
    }
}

/// Outcome of one directed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTest {
    pub source: usize,
    pub target: usize,
    pub method: Method,
    pub chosen_lag: usize,
    /// F for Granger, t for the residual method.
    pub statistic: f64,
    pub raw_p: f64,
    pub adjusted_p: f64,
    /// Residual method: share of residual variance explained by the lagged
    /// source. Granger: R² of the full model.
    pub r_squared: f64,
    pub sign: Sign,
    pub significant: bool,
    /// Set when the target residuals carry no variance (perfect forecaster).
    pub untestable: bool,
}

/// Statistics for one candidate lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagResult {
    pub lag: usize,
    pub statistic: f64,
    pub raw_p: f64,
    pub r_squared: f64,
    pub sign: Sign,
}

/// All candidate lags of one ordered pair, before multiple-testing correction.
#[derive(Debug, Clone, PartialEq)]
pub struct LagScan {
    pub source: usize,
    pub target: usize,
    pub method: Method,
    pub lags: Vec<LagResult>,
    pub untestable: bool,
}

impl LagScan {
    /// Picks the lag with the smallest adjusted p-value (smaller lag on ties).
    pub fn finalize(&self, adjusted: &[f64], alpha: f64) -> EdgeTest {
        assert_eq!(adjusted.len(), self.lags.len());
        let mut best = 0;
        for k in 1..self.lags.len() {
            if adjusted[k] < adjusted[best] {
                best = k;
            }
        }
        let lag = &self.lags[best];
        EdgeTest {
            source: self.source,
            target: self.target,
            method: self.method,
            chosen_lag: lag.lag,
            statistic: lag.statistic,
            raw_p: lag.raw_p,
            adjusted_p: adjusted[best],
            r_squared: lag.r_squared,
            sign: lag.sign,
            significant: !self.untestable && adjusted[best] < alpha,
            untestable: self.untestable,
        }
    }

    fn raw_ps(&self) -> Vec<f64> {
        self.lags.iter().map(|l| l.raw_p).collect()
    }
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), CausalityError> {
    if x.len() != y.len() {
        return Err(CausalityError::LengthMismatch(x.len(), y.len()));
    }
    Ok(())
}

/// Restricted-vs-full F tests of `x → y` for every configured order.
pub fn granger_scan(x: &[f64], y: &[f64], cfg: &CausalityConfig) -> Result<LagScan, CausalityError> {
    check_lengths(x, y)?;
    let need = 2 * cfg.max_lag + 2;
    if y.len() <= need {
        return Err(CausalityError::TooShort { method: "granger", need, got: y.len() });
    }
    let mut lags = Vec::new();
    for p in cfg.lags() {
        let rows = y.len() - p;
        let mut restricted = Design::with_intercept(rows);
        for lag in 1..=p {
            restricted.push((p..y.len()).map(|t| y[t - lag]).collect());
        }
        let mut full = restricted.clone();
        for lag in 1..=p {
            full.push((p..y.len()).map(|t| x[t - lag]).collect());
        }
        let response = &y[p..];
        let fit_r = stats::ols(&restricted, response)?;
        let fit_f = stats::ols(&full, response)?;
        let df2 = (rows - 2 * p - 1) as f64;
        let (statistic, raw_p) = if fit_f.rss > 0.0 {
            let f = ((fit_r.rss - fit_f.rss).max(0.0) / p as f64) / (fit_f.rss / df2);
            (f, stats::f_sf(f, p as f64, df2))
        } else if fit_r.rss > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (0.0, 1.0)
        };
        let cross_sum: f64 = fit_f.coefficients[1 + p..].iter().sum();
        lags.push(LagResult { lag: p, statistic, raw_p, r_squared: fit_f.r_squared, sign: Sign::of(cross_sum) });
    }
    Ok(LagScan { source: 0, target: 0, method: Method::Granger, lags, untestable: false })
}

/// Lagged residual–source correlation tests given precomputed residuals of `y`.
///
/// `residuals.residuals[k]` belongs to time `w + k`; lag `ℓ` pairs
/// `r_{w+k+ℓ}` with `x_{w+k}`, giving `T − w − ℓ` aligned samples.
pub fn residual_scan(x: &[f64], residuals: &Rolling, cfg: &CausalityConfig) -> Result<LagScan, CausalityError> {
    let w = residuals.context;
    let r = &residuals.residuals;
    if x.len() != w + r.len() {
        return Err(CausalityError::LengthMismatch(x.len(), w + r.len()));
    }
    let need = w + cfg.max_lag + 3;
    if x.len() <= need {
        return Err(CausalityError::TooShort { method: "residual", need, got: x.len() });
    }
    let lags: Vec<usize> = (1..=cfg.max_lag).collect();
    let r_mean = r.iter().sum::<f64>() / r.len() as f64;
    let r_scale = r.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if r.iter().all(|v| (v - r_mean).abs() <= 1e-12 * r_scale.max(1.0)) {
        let lags = lags
            .into_iter()
            .map(|lag| LagResult { lag, statistic: 0.0, raw_p: 1.0, r_squared: 0.0, sign: Sign::Positive })
            .collect();
        return Ok(LagScan { source: 0, target: 0, method: Method::Residual, lags, untestable: true });
    }

    let mut out = Vec::with_capacity(lags.len());
    for lag in lags {
        let n = r.len() - lag;
        let resid = &r[lag..];
        let xs = &x[w..w + n];
        let rho = match stats::pearson(xs, resid) {
            Ok(rho) => rho,
            // A residual segment can be flat even when the whole vector is not.
            Err(StatsError::Constant { which: "y" }) => {
                out.push(LagResult { lag, statistic: 0.0, raw_p: 1.0, r_squared: 0.0, sign: Sign::Positive });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (t, p) = stats::correlation_t_test(rho, n);
        let mut design = Design::with_intercept(n);
        design.push(xs.to_vec());
        let fit = stats::ols(&design, resid)?;
        out.push(LagResult { lag, statistic: t, raw_p: p, r_squared: fit.r_squared, sign: Sign::of(fit.coefficients[1]) });
    }
    Ok(LagScan { source: 0, target: 0, method: Method::Residual, lags: out, untestable: false })
}

/// Classical Granger test of `x → y` with per-pair BH over the lag sweep.
pub fn granger_pair(x: &TimeSeries, y: &TimeSeries, cfg: &CausalityConfig) -> Result<EdgeTest, CausalityError> {
    let cfg = CausalityConfig { method: Method::Granger, ..cfg.clone() };
    cfg.validate()?;
    let scan = granger_scan(x.values(), y.values(), &cfg)?;
    Ok(scan.finalize(&stats::bh_adjust(&scan.raw_ps())?, cfg.alpha))
}

/// Residual-method test of `x → y` using `cfg.forecaster`.
pub fn residual_pair(x: &TimeSeries, y: &TimeSeries, cfg: &CausalityConfig) -> Result<EdgeTest, CausalityError> {
    let cfg = CausalityConfig { method: Method::Residual, ..cfg.clone() };
    cfg.validate()?;
    let forecaster = cfg.forecaster.build()?;
    residual_pair_with(forecaster.as_ref(), x, y, &cfg)
}

/// [`residual_pair`] with an already constructed forecaster.
pub fn residual_pair_with(
    forecaster: &dyn Forecaster,
    x: &TimeSeries,
    y: &TimeSeries,
    cfg: &CausalityConfig,
) -> Result<EdgeTest, CausalityError> {
    check_lengths(x.values(), y.values())?;
    let need = cfg.context_w + cfg.max_lag + 3;
    if y.len() <= need {
        return Err(CausalityError::TooShort { method: "residual", need, got: y.len() });
    }
    let rolling = forecast::rolling_one_step(forecaster, y.values(), cfg.context_w)?;
    let scan = residual_scan(x.values(), &rolling, cfg)?;
    Ok(scan.finalize(&stats::bh_adjust(&scan.raw_ps())?, cfg.alpha))
}

/// Tests every ordered pair of the panel and returns the significant edges
/// together with all test records sorted by `(source, target)`.
///
/// `forecaster` overrides `cfg.forecaster` for the residual method (used to
/// share a bridge pool across panels).
pub fn infer_graph(
    panel: &MultiSeries,
    cfg: &CausalityConfig,
    forecaster: Option<&dyn Forecaster>,
) -> Result<(CausalGraph, Vec<EdgeTest>), CausalityError> {
    cfg.validate()?;
    let n = panel.n_series();
    if n < 2 {
        return Err(CausalityError::TooFewSeries);
    }
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|s| (0..n).filter(move |&t| t != s).map(move |t| (s, t))).collect();
    let name = |i: usize| panel.names()[i].clone();
    let pair_err = |s: usize, t: usize, e: CausalityError| CausalityError::Pair {
        source_name: name(s),
        target_name: name(t),
        error: Box::new(e),
    };

    let scans: Vec<LagScan> = match cfg.method {
        Method::Granger => pairs
            .par_iter()
            .map(|&(s, t)| {
                granger_scan(panel.column(s), panel.column(t), cfg)
                    .map(|scan| LagScan { source: s, target: t, ..scan })
                    .map_err(|e| pair_err(s, t, e))
            })
            .collect::<Result<_, _>>()?,
        Method::Residual => {
            let owned;
            let forecaster: &dyn Forecaster = match forecaster {
                Some(f) => f,
                None => {
                    owned = cfg.forecaster.build()?;
                    owned.as_ref()
                }
            };
            let need = cfg.context_w + cfg.max_lag + 3;
            if panel.n_rows() <= need {
                return Err(CausalityError::TooShort { method: "residual", need, got: panel.n_rows() });
            }
            // Residuals depend on the target only.
            let residuals: Vec<Rolling> = (0..n)
                .into_par_iter()
                .map(|t| {
                    forecast::rolling_one_step(forecaster, panel.column(t), cfg.context_w)
                        .map_err(|error| CausalityError::Residuals { target_name: name(t), error })
                })
                .collect::<Result<_, _>>()?;
            pairs
                .par_iter()
                .map(|&(s, t)| {
                    residual_scan(panel.column(s), &residuals[t], cfg)
                        .map(|scan| LagScan { source: s, target: t, ..scan })
                        .map_err(|e| pair_err(s, t, e))
                })
                .collect::<Result<_, _>>()?
        }
    };

    let tests: Vec<EdgeTest> = match cfg.bh_family {
        BhScope::PerPair => scans
            .iter()
            .map(|scan| Ok(scan.finalize(&stats::bh_adjust(&scan.raw_ps())?, cfg.alpha)))
            .collect::<Result<_, CausalityError>>()?,
        BhScope::PerPanel => {
            let all: Vec<f64> = scans.iter().flat_map(LagScan::raw_ps).collect();
            let adjusted = stats::bh_adjust(&all)?;
            let mut offset = 0;
            scans
                .iter()
                .map(|scan| {
                    let k = scan.lags.len();
                    let e = scan.finalize(&adjusted[offset..offset + k], cfg.alpha);
                    offset += k;
                    e
                })
                .collect()
        }
    };

    let mut graph = CausalGraph::new(n);
    for e in tests.iter().filter(|e| e.significant) {
        graph.add_edge(e.source, e.target, e.sign).expect("pairs exclude self-loops");
    }
    Ok((graph, tests))
}

/// Edge-list CSV: `source,target,lag,stat,raw_p,adj_p,r2,sign,significant`.
pub fn write_edge_csv<W: Write>(names: &[String], tests: &[EdgeTest], writer: W) -> Result<(), CausalityError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["source", "target", "lag", "stat", "raw_p", "adj_p", "r2", "sign", "significant"])?;
    for e in tests {
        wtr.write_record([
            names[e.source].clone(),
            names[e.target].clone(),
            e.chosen_lag.to_string(),
            e.statistic.to_string(),
            e.raw_p.to_string(),
            e.adjusted_p.to_string(),
            e.r_squared.to_string(),
            e.sign.as_i8().to_string(),
            e.significant.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn coupled(seed: u64, n: usize, coupling: f64, noise: f64) -> (TimeSeries, TimeSeries) {
        let mut rng = Seed(seed).stream(0);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut y = vec![0.0];
        for t in 1..n {
            let e: f64 = rng.sample(StandardNormal);
            y.push(0.5 * y[t - 1] + coupling * x[t - 1] + noise * e);
        }
        (TimeSeries::new("x", x).unwrap(), TimeSeries::new("y", y).unwrap())
    }

    #[test]
    fn granger_detects_constructed_coupling() {
        let (x, y) = coupled(1, 200, 0.8, 0.01);
        let e = granger_pair(&x, &y, &CausalityConfig::granger()).unwrap();
        assert!(e.significant);
        assert_eq!(e.sign, Sign::Positive);
        assert_eq!(e.chosen_lag, 1);

        let (x, y) = coupled(2, 200, -0.8, 0.01);
        let e = granger_pair(&x, &y, &CausalityConfig::granger()).unwrap();
        assert!(e.significant);
        assert_eq!(e.sign, Sign::Negative);
    }

    #[test]
    fn granger_rejects_short_and_constant_input() {
        let (x, y) = coupled(1, 12, 0.8, 0.1);
        assert!(matches!(granger_pair(&x, &y, &CausalityConfig::granger()), Err(CausalityError::TooShort { .. })));
        let flat = TimeSeries::new("c", vec![1.0; 100]).unwrap();
        let (x, _) = coupled(1, 100, 0.8, 0.1);
        assert!(matches!(
            granger_pair(&x, &flat, &CausalityConfig::granger()),
            Err(CausalityError::Stats(StatsError::RankDeficient { .. }))
        ));
    }

    #[test]
    fn granger_f_is_affine_invariant() {
        let (x, y) = coupled(5, 150, 0.3, 1.0);
        let cfg = CausalityConfig::granger();
        let a = granger_scan(x.values(), y.values(), &cfg).unwrap();
        let xs: Vec<f64> = x.values().iter().map(|v| 3.0 * v - 7.0).collect();
        let ys: Vec<f64> = y.values().iter().map(|v| -0.2 * v + 11.0).collect();
        let b = granger_scan(&xs, &ys, &cfg).unwrap();
        for (la, lb) in a.lags.iter().zip(&b.lags) {
            assert!((la.statistic - lb.statistic).abs() <= 1e-8 * la.statistic.abs().max(1.0));
        }
    }

    #[test]
    fn fixed_order_runs_one_lag() {
        let (x, y) = coupled(3, 120, 0.5, 1.0);
        let cfg = CausalityConfig { granger_order: GrangerOrder::Fixed(2), ..CausalityConfig::granger() };
        let scan = granger_scan(x.values(), y.values(), &cfg).unwrap();
        assert_eq!(scan.lags.len(), 1);
        assert_eq!(scan.lags[0].lag, 2);
        let bad = CausalityConfig { granger_order: GrangerOrder::Fixed(9), ..CausalityConfig::granger() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn residual_alignment_counts() {
        let (x, y) = coupled(4, 100, 0.8, 0.1);
        let f = crate::forecast::NativeForecaster::new(ForecasterSpec::NaiveMean).unwrap();
        let rolling = forecast::rolling_one_step(&f, y.values(), 30).unwrap();
        assert_eq!(rolling.residuals.len(), 70);
        let cfg = CausalityConfig::residual(ForecasterSpec::NaiveMean);
        let scan = residual_scan(x.values(), &rolling, &cfg).unwrap();
        // n_aligned = 70 − ℓ; recover n from t and ρ: t² = ρ²(n−2)/(1−ρ²).
        for l in &scan.lags {
            let n = 70 - l.lag;
            let mut d = Design::with_intercept(n);
            d.push(x.values()[30..30 + n].to_vec());
            let fit = stats::ols(&d, &rolling.residuals[l.lag..]).unwrap();
            assert!((fit.r_squared - l.r_squared).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_detects_coupling_with_naive_mean() {
        let cfg = CausalityConfig::residual(ForecasterSpec::NaiveMean);
        let mut hits = 0;
        for seed in 0..100 {
            let (x, y) = coupled(seed, 100, 0.8, 0.1);
            let e = residual_pair(&x, &y, &cfg).unwrap();
            hits += usize::from(e.significant && e.chosen_lag == 1 && e.sign == Sign::Positive);
        }
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn perfect_forecaster_is_untestable() {
        let (x, _) = coupled(1, 100, 0.0, 1.0);
        let y = TimeSeries::new("y", vec![0.4; 100]).unwrap();
        let e = residual_pair(&x, &y, &CausalityConfig::residual(ForecasterSpec::NaiveLast)).unwrap();
        assert!(e.untestable);
        assert!(!e.significant);
    }

    #[test]
    fn config_validation() {
        let mut cfg = CausalityConfig::residual(ForecasterSpec::ar(5));
        cfg.max_lag = 30;
        assert!(cfg.validate().is_err());
        let cfg = CausalityConfig { alpha: 1.5, ..CausalityConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = CausalityConfig::residual(ForecasterSpec::linreg());
        assert!(cfg.validate().is_err(), "window 60 needs more than 30 points of context");
    }

    #[test]
    fn infer_graph_counts_and_degenerate_panel() {
        let (x, y) = coupled(8, 150, 0.8, 0.1);
        let panel = MultiSeries::from_series(vec![x.clone(), y]).unwrap();
        let (g, tests) = infer_graph(&panel, &CausalityConfig::granger(), None).unwrap();
        assert_eq!(tests.len(), 2);
        assert!(g.has_edge(0, 1));
        assert_eq!((tests[0].source, tests[0].target), (0, 1));

        let same = MultiSeries::from_columns(vec![x.values().to_vec(); 3]).unwrap();
        assert!(matches!(
            infer_graph(&same, &CausalityConfig::granger(), None),
            Err(CausalityError::Pair { .. })
        ));
        let single = MultiSeries::from_columns(vec![x.values().to_vec()]).unwrap();
        assert!(matches!(infer_graph(&single, &CausalityConfig::granger(), None), Err(CausalityError::TooFewSeries)));
    }

    #[test]
    fn per_panel_scope_adjusts_over_all_pairs() {
        let mut cols = Vec::new();
        let mut rng = Seed(21).stream(0);
        for _ in 0..4 {
            cols.push((0..120).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>());
        }
        let panel = MultiSeries::from_columns(cols).unwrap();
        let cfg = CausalityConfig { bh_family: BhScope::PerPanel, ..CausalityConfig::granger() };
        let whole = infer_graph(&panel, &cfg, None).unwrap().1;
        assert_eq!(whole.len(), 12);

        let mut raw = Vec::new();
        for e in &whole {
            let scan = granger_scan(panel.column(e.source), panel.column(e.target), &cfg).unwrap();
            raw.extend(scan.raw_ps());
        }
        let adjusted = stats::bh_adjust(&raw).unwrap();
        for (k, e) in whole.iter().enumerate() {
            let block = &adjusted[5 * k..5 * k + 5];
            let best = block.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(e.adjusted_p, best);
        }
    }

    #[test]
    fn edge_csv_format() {
        let e = EdgeTest {
            source: 0,
            target: 1,
            method: Method::Granger,
            chosen_lag: 2,
            statistic: 4.5,
            raw_p: 0.01,
            adjusted_p: 0.02,
            r_squared: 0.3,
            sign: Sign::Negative,
            significant: true,
            untestable: false,
        };
        let mut buf = Vec::new();
        write_edge_csv(&["a".into(), "b".into()], &[e], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source,target,lag,stat,raw_p,adj_p,r2,sign,significant\na,b,2,4.5,0.01,0.02,0.3,-1,true\n"
        );
    }
}
