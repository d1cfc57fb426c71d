//! Forecasters behind one interface: naive mean/last, lag linear regression,
//! ARIMA (Hannan–Rissanen), exponential smoothing with trend selection, and
//! external processes speaking the line protocol in [`external`].
//!
//! Multi-step forecasts are recursive: each model feeds its own predictions
//! back as history.

pub mod arima;
pub mod ets;
pub mod external;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{self, Design, StatsError};
use crate::series::TimeSeries;

pub use arima::{fit_arima, ArimaFit};
pub use ets::{fit_ets, EtsFit, EtsMode, Trend};
pub use external::{BridgeError, ExternalPool, ExternalSpec};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("{kind} needs at least {need} points of history, got {got}")]
    InsufficientHistory { kind: &'static str, need: usize, got: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("invalid forecaster parameters: {0}")]
    InvalidSpec(String),
    #[error("series of length {len} is too short for context window {window}")]
    ContextTooLong { len: usize, window: usize },
    #[error("length mismatch: {0} actual vs {1} predicted")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("forecaster produced a non-finite value")]
    NonFinite,
    #[error("forecast for index {t} failed: {source}")]
    AtIndex {
        t: usize,
        #[source]
        source: Box<ForecastError>,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

/// Tagged description of a forecaster and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecasterSpec {
    NaiveMean,
    NaiveLast,
    Linreg {
        #[serde(default = "default_window")]
        window: usize,
    },
    Arima {
        #[serde(default = "default_order")]
        p: usize,
        #[serde(default)]
        d: usize,
        #[serde(default = "default_order")]
        q: usize,
    },
    Ets {
        #[serde(default)]
        mode: EtsMode,
    },
    External(ExternalSpec),
}

fn default_window() -> usize {
    60
}

fn default_order() -> usize {
    5
}

impl ForecasterSpec {
    pub fn linreg() -> Self {
        ForecasterSpec::Linreg { window: default_window() }
    }

    /// ARIMA(5, 0, 5).
    pub fn arima() -> Self {
        ForecasterSpec::Arima { p: 5, d: 0, q: 5 }
    }

    /// Pure autoregression of order `p` (ARIMA(p, 0, 0)).
    pub fn ar(p: usize) -> Self {
        ForecasterSpec::Arima { p, d: 0, q: 0 }
    }

    pub fn ets() -> Self {
        ForecasterSpec::Ets { mode: EtsMode::Auto }
    }

    /// Short stable label used in reports.
    pub fn label(&self) -> String {
        match self {
            ForecasterSpec::NaiveMean => "naive_mean".into(),
            ForecasterSpec::NaiveLast => "naive_last".into(),
            ForecasterSpec::Linreg { window } => format!("linreg(w={window})"),
            ForecasterSpec::Arima { p, d, q } => format!("arima({p},{d},{q})"),
            ForecasterSpec::Ets { mode } => format!("ets({})", mode.label()),
            ForecasterSpec::External(_) => "external".into(),
        }
    }

    pub fn validate(&self) -> Result<(), ForecastError> {
        match self {
            ForecasterSpec::Linreg { window } if *window == 0 => {
                Err(ForecastError::InvalidSpec("linreg window must be >= 1".into()))
            }
            ForecasterSpec::Arima { d, .. } if *d > 1 => {
                Err(ForecastError::InvalidSpec(format!("differencing order {d} not in {{0, 1}}")))
            }
            ForecasterSpec::External(ext) => ext.validate().map_err(ForecastError::from),
            _ => Ok(()),
        }
    }

    /// Smallest history the forecaster accepts.
    pub fn min_history(&self) -> usize {
        match self {
            ForecasterSpec::NaiveMean | ForecasterSpec::NaiveLast | ForecasterSpec::External(_) => 1,
            // rows (n − w) must exceed the w + 1 regression parameters
            ForecasterSpec::Linreg { window } => 2 * window + 2,
            ForecasterSpec::Arima { p, d, q } => arima::min_history(*p, *d, *q),
            ForecasterSpec::Ets { .. } => 3,
        }
    }

    /// Instantiates the forecaster. External specs launch their bridge pool here.
    pub fn build(&self) -> Result<Box<dyn Forecaster>, ForecastError> {
        self.validate()?;
        Ok(match self {
            ForecasterSpec::External(ext) => Box::new(ExternalPool::launch(ext)?),
            native => Box::new(NativeForecaster { spec: native.clone() }),
        })
    }
}

/// A point forecast of fixed horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    values: Vec<f64>,
}

impl Forecast {
    pub fn new(values: Vec<f64>) -> Result<Self, ForecastError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ForecastError::NonFinite);
        }
        Ok(Self { values })
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub trait Forecaster: Send + Sync {
    fn label(&self) -> String;

    fn min_history(&self) -> usize;

    fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>, ForecastError>;

    /// Forecasts several independent histories. Implementations that can
    /// pipeline requests override this.
    fn forecast_many(&self, histories: &[&[f64]], horizon: usize) -> Result<Vec<Vec<f64>>, ForecastError> {
        histories.iter().map(|h| self.forecast(h, horizon)).collect()
    }
}

/// In-process forecasters.
#[derive(Debug, Clone)]
pub struct NativeForecaster {
    spec: ForecasterSpec,
}

impl NativeForecaster {
    pub fn new(spec: ForecasterSpec) -> Result<Self, ForecastError> {
        if matches!(spec, ForecasterSpec::External(_)) {
            return Err(ForecastError::InvalidSpec("external forecasters are not native".into()));
        }
        spec.validate()?;
        Ok(Self { spec })
    }
}

impl Forecaster for NativeForecaster {
    fn label(&self) -> String {
        self.spec.label()
    }

    fn min_history(&self) -> usize {
        self.spec.min_history()
    }

    fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>, ForecastError> {
        if horizon == 0 {
            return Err(ForecastError::ZeroHorizon);
        }
        let need = self.spec.min_history();
        if history.len() < need {
            let kind = match &self.spec {
                ForecasterSpec::NaiveMean => "naive_mean",
                ForecasterSpec::NaiveLast => "naive_last",
                ForecasterSpec::Linreg { .. } => "linreg",
                ForecasterSpec::Arima { .. } => "arima",
                ForecasterSpec::Ets { .. } => "ets",
                ForecasterSpec::External(_) => "external",
            };
            return Err(ForecastError::InsufficientHistory { kind, need, got: history.len() });
        }
        let out = match &self.spec {
            ForecasterSpec::NaiveMean => {
                let mean = history.iter().sum::<f64>() / history.len() as f64;
                vec![mean; horizon]
            }
            ForecasterSpec::NaiveLast => vec![history[history.len() - 1]; horizon],
            ForecasterSpec::Linreg { window } => {
                let model = fit_autoregression(history, *window)?;
                model.forecast(history, horizon)
            }
            ForecasterSpec::Arima { p, d, q } => fit_arima(history, *p, *d, *q)?.forecast(horizon),
            ForecasterSpec::Ets { mode } => fit_ets(history, *mode)?.forecast(horizon),
            ForecasterSpec::External(_) => unreachable!("rejected in NativeForecaster::new"),
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(ForecastError::NonFinite);
        }
        Ok(out)
    }
}

/// `y_t = c + Σ_{i=1..p} φ_i·y_{t−i}` fitted by (rank-tolerant) least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoregression {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl Autoregression {
    /// Recursive forecast continuing `history`.
    pub fn forecast(&self, history: &[f64], horizon: usize) -> Vec<f64> {
        let p = self.coefficients.len();
        let mut buf: Vec<f64> = history[history.len() - p..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let n = buf.len();
            let next = self.intercept
                + self.coefficients.iter().enumerate().map(|(i, c)| c * buf[n - 1 - i]).sum::<f64>();
            buf.push(next);
            out.push(next);
        }
        out
    }
}

/// Lag design for an AR(p) regression on `values`: rows `t = p..n`.
pub(crate) fn lag_design(values: &[f64], p: usize) -> (Design, Vec<f64>) {
    let rows = values.len() - p;
    let mut design = Design::with_intercept(rows);
    for lag in 1..=p {
        design.push((p..values.len()).map(|t| values[t - lag]).collect());
    }
    (design, values[p..].to_vec())
}

pub fn fit_autoregression(values: &[f64], p: usize) -> Result<Autoregression, ForecastError> {
    if values.len() < 2 * p + 2 {
        return Err(ForecastError::InsufficientHistory { kind: "autoregression", need: 2 * p + 2, got: values.len() });
    }
    let (design, response) = lag_design(values, p);
    let fit = stats::ols_lenient(&design, &response)?;
    Ok(Autoregression {
        intercept: fit.coefficients[0],
        coefficients: fit.coefficients[1..].to_vec(),
        std_errors: fit.std_errors[1..].to_vec(),
        residuals: fit.residuals,
    })
}

/// Builds the forecaster for `spec` and predicts `horizon` steps past `history`.
pub fn fit_predict(spec: &ForecasterSpec, history: &TimeSeries, horizon: usize) -> Result<Forecast, ForecastError> {
    let forecaster = spec.build()?;
    Forecast::new(forecaster.forecast(history.values(), horizon)?)
}

/// One-step predictions over a sliding context window and their residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Rolling {
    pub context: usize,
    /// `predictions[k]` forecasts `series[context + k]`.
    pub predictions: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Windows handed to a forecaster per `forecast_many` call.
pub const ROLLING_BATCH: usize = 32;

/// For each `t` in `[w, T)` predicts `Y_t` from exactly `Y_{t−w..t−1}` and
/// records `r_t = Y_t − Ŷ_t`.
pub fn rolling_one_step(forecaster: &dyn Forecaster, series: &[f64], context_w: usize) -> Result<Rolling, ForecastError> {
    if context_w == 0 || series.len() <= context_w {
        return Err(ForecastError::ContextTooLong { len: series.len(), window: context_w });
    }
    let targets: Vec<usize> = (context_w..series.len()).collect();
    let mut predictions = Vec::with_capacity(targets.len());
    for chunk in targets.chunks(ROLLING_BATCH) {
        let windows: Vec<&[f64]> = chunk.iter().map(|&t| &series[t - context_w..t]).collect();
        let out = match forecaster.forecast_many(&windows, 1) {
            Ok(out) => out,
            Err(_) => {
                // Re-run one by one to pin the failing index.
                for &t in chunk {
                    if let Err(e) = forecaster.forecast(&series[t - context_w..t], 1) {
                        return Err(ForecastError::AtIndex { t, source: Box::new(e) });
                    }
                }
                return Err(ForecastError::AtIndex {
                    t: chunk[0],
                    source: Box::new(ForecastError::InvalidSpec("batched forecast failed".into())),
                });
            }
        };
        for (&t, f) in chunk.iter().zip(out) {
            match f.first() {
                Some(v) if v.is_finite() => predictions.push(*v),
                _ => return Err(ForecastError::AtIndex { t, source: Box::new(ForecastError::NonFinite) }),
            }
        }
    }
    let residuals = targets.iter().zip(&predictions).map(|(&t, p)| series[t] - p).collect();
    Ok(Rolling { context: context_w, predictions, residuals })
}

/// Convenience wrapper building the forecaster from its spec.
pub fn rolling_one_step_spec(spec: &ForecasterSpec, series: &TimeSeries, context_w: usize) -> Result<Rolling, ForecastError> {
    let forecaster = spec.build()?;
    rolling_one_step(forecaster.as_ref(), series.values(), context_w)
}

/// Denominator floor for near-zero targets.
pub const MAPE_EPS: f64 = 1e-8;

/// Mean absolute percentage error as a fraction: `mean(|y − ŷ| / max(|y|, ε))`.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, ForecastError> {
    if actual.len() != predicted.len() {
        return Err(ForecastError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(ForecastError::Empty);
    }
    let total: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, f)| {
            let err = (y - f).abs();
            if err == 0.0 {
                0.0
            } else {
                err / y.abs().max(MAPE_EPS)
            }
        })
        .sum();
    Ok(total / actual.len() as f64)
}
