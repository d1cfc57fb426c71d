//! Ground-truth scoring, the synthetic experiment sweeps, and the panel
//! forecasting benchmark.
//!
//! Trials are independent and run on the rayon pool. Each trial's seed is
//! `master.derive("<experiment>:<param>", trial)` with the parameter printed
//! to six decimals, so any single trial can be replayed in isolation. Rows
//! are sorted by `(method, param, trial)` before aggregation.

mod plot;
mod report;
mod score;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plot::render_metric_panels;
pub use report::{
    aggregate, find_aggregate, read_rows_csv, read_summary_csv, write_rows_csv, write_summary_csv, Aggregate,
    ExperimentReport, ForecastRow, ReportPaths, ReportRow, RowTable, TrialRow,
};
pub use score::{format_pairs, score_graph, GraphScore};

use crate::causality::{infer_graph, BhScope, CausalityConfig, CausalityError, Method};
use crate::forecast::{mape, ForecastError, Forecaster, ForecasterSpec};
use crate::series::{minmax_scale_values, MultiSeries, Seed, SeriesError, SplitSpec};
use crate::synthgen::{gen_logistic, gen_mou, CausalGraph, Diagonal, LogisticSpec, MouSpec, SynthError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("graphs have different node counts: {0} vs {1}")]
    NodeCountMismatch(usize, usize),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Causality(#[from] CausalityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Report label of a causality configuration, e.g. `granger` or
/// `residual[arima(5,0,0)]`; panel-wide BH adds a `/panel` suffix.
pub fn method_label(cfg: &CausalityConfig) -> String {
    let base = match cfg.method {
        Method::Granger => "granger".to_string(),
        Method::Residual => format!("residual[{}]", cfg.forecaster.label()),
    };
    match cfg.bh_family {
        BhScope::PerPair => base,
        BhScope::PerPanel => format!("{base}/panel"),
    }
}

fn default_methods() -> Vec<CausalityConfig> {
    vec![CausalityConfig::granger(), CausalityConfig::residual(ForecasterSpec::ar(5))]
}

fn grid_01_09() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticExperimentConfig {
    pub alphas: Vec<f64>,
    pub seeds_per_value: usize,
    pub n: usize,
    pub r: f64,
    pub noise_halfwidth: f64,
    pub methods: Vec<CausalityConfig>,
}

impl Default for LogisticExperimentConfig {
    fn default() -> Self {
        Self { alphas: grid_01_09(), seeds_per_value: 10, n: 100, r: 3.8, noise_halfwidth: 0.01, methods: default_methods() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MouExperimentConfig {
    pub densities: Vec<f64>,
    pub seeds_per_value: usize,
    pub n_nodes: usize,
    pub t_points: usize,
    pub sigma2: f64,
    pub dt: f64,
    pub burn_in: usize,
    pub diagonal: Diagonal,
    pub methods: Vec<CausalityConfig>,
}

impl Default for MouExperimentConfig {
    fn default() -> Self {
        Self {
            densities: grid_01_09(),
            seeds_per_value: 10,
            n_nodes: 10,
            t_points: 100,
            sigma2: 0.2,
            dt: 0.1,
            burn_in: 200,
            diagonal: Diagonal::default(),
            methods: default_methods(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastBenchmarkConfig {
    pub forecasters: Vec<ForecasterSpec>,
    pub train_fraction: f64,
}

impl Default for ForecastBenchmarkConfig {
    fn default() -> Self {
        Self {
            forecasters: vec![
                ForecasterSpec::NaiveMean,
                ForecasterSpec::NaiveLast,
                ForecasterSpec::linreg(),
                ForecasterSpec::arima(),
                ForecasterSpec::ets(),
            ],
            train_fraction: 0.9,
        }
    }
}

fn check_methods(methods: &[CausalityConfig]) -> Result<Vec<String>, EvalError> {
    if methods.is_empty() {
        return Err(EvalError::InvalidConfig("no methods configured".into()));
    }
    let labels: Vec<String> = methods.iter().map(method_label).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(EvalError::InvalidConfig(format!("duplicate method {l}")));
        }
    }
    for m in methods {
        m.validate()?;
    }
    Ok(labels)
}

fn check_grid(name: &str, values: &[f64], seeds: usize) -> Result<(), EvalError> {
    if values.is_empty() || seeds == 0 {
        return Err(EvalError::InvalidConfig(format!("empty {name} grid or zero seeds")));
    }
    Ok(())
}

/// Seed of trial `index` at parameter value `param`.
pub fn trial_seed(master: Seed, experiment: &str, param: f64, index: u64) -> Seed {
    master.derive(&format!("{experiment}:{param:.6}"), index)
}

/// Builds each residual method's forecaster once so bridge pools are shared
/// across trials.
fn build_forecasters(methods: &[CausalityConfig]) -> Result<Vec<Option<Box<dyn Forecaster>>>, EvalError> {
    methods
        .iter()
        .map(|m| match m.method {
            Method::Residual => Ok(Some(m.forecaster.build()?)),
            Method::Granger => Ok(None),
        })
        .collect()
}

type Generator<'a> = dyn Fn(Seed, f64) -> Result<(MultiSeries, CausalGraph), EvalError> + Sync + 'a;

fn run_graph_experiment(
    experiment: &str,
    params: &[f64],
    seeds_per_value: usize,
    methods: &[CausalityConfig],
    master: Seed,
    generate: &Generator<'_>,
) -> Result<Vec<TrialRow>, EvalError> {
    let labels = check_methods(methods)?;
    let forecasters = build_forecasters(methods)?;
    let trials: Vec<(f64, u64)> =
        params.iter().flat_map(|&p| (0..seeds_per_value as u64).map(move |k| (p, k))).collect();

    let mut rows: Vec<TrialRow> = trials
        .par_iter()
        .flat_map_iter(|&(param, trial)| {
            let seed = trial_seed(master, experiment, param, trial);
            let data = generate(seed, param);
            let mut out = Vec::with_capacity(methods.len());
            for (m, cfg) in methods.iter().enumerate() {
                let start = Instant::now();
                let outcome = data.as_ref().map_err(|e| e.to_string()).and_then(|(panel, truth)| {
                    let (pred, _) = infer_graph(panel, cfg, forecasters[m].as_deref()).map_err(|e| e.to_string())?;
                    score_graph(&pred, truth).map(|s| (s, truth.n_edges(), pred.n_edges())).map_err(|e| e.to_string())
                });
                let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
                out.push(trial_row(experiment, &labels[m], param, trial, seed, outcome, elapsed_ms));
            }
            out
        })
        .collect();
    rows.sort_by(|a, b| {
        a.method.cmp(&b.method).then(a.param.total_cmp(&b.param)).then(a.trial.cmp(&b.trial))
    });
    Ok(rows)
}

fn trial_row(
    experiment: &str,
    method: &str,
    param: f64,
    trial: u64,
    seed: Seed,
    outcome: Result<(GraphScore, usize, usize), String>,
    elapsed_ms: f64,
) -> TrialRow {
    let mut row = TrialRow {
        experiment: experiment.to_string(),
        method: method.to_string(),
        param,
        trial,
        seed: seed.0,
        n_true: 0,
        n_pred: 0,
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
        accuracy: f64::NAN,
        precision: f64::NAN,
        recall: f64::NAN,
        sign_mismatch: f64::NAN,
        precision_undefined: false,
        recall_undefined: false,
        false_positives: String::new(),
        false_negatives: String::new(),
        error: String::new(),
        elapsed_ms,
    };
    match outcome {
        Ok((s, n_true, n_pred)) => {
            row.n_true = n_true;
            row.n_pred = n_pred;
            row.tp = s.tp;
            row.fp = s.fp;
            row.tn = s.tn;
            row.fn_ = s.fn_;
            row.accuracy = s.accuracy;
            row.precision = s.precision;
            row.recall = s.recall;
            row.sign_mismatch = s.sign_mismatch_rate;
            row.precision_undefined = s.precision_undefined;
            row.recall_undefined = s.recall_undefined;
            row.false_positives = format_pairs(&s.false_positives);
            row.false_negatives = format_pairs(&s.false_negatives);
        }
        Err(e) => row.error = e,
    }
    row
}

fn echo<T: Serialize>(cfg: &T) -> Result<serde_json::Value, EvalError> {
    Ok(serde_json::to_value(cfg)?)
}

pub fn run_logistic_experiment(cfg: &LogisticExperimentConfig, master: Seed) -> Result<ExperimentReport<TrialRow>, EvalError> {
    check_grid("alpha", &cfg.alphas, cfg.seeds_per_value)?;
    let start = Instant::now();
    let generate = |seed: Seed, alpha: f64| {
        let spec = LogisticSpec { r: cfg.r, noise_halfwidth: cfg.noise_halfwidth, ..LogisticSpec::new(alpha, cfg.n, seed) };
        Ok(gen_logistic(&spec)?)
    };
    let rows = run_graph_experiment("logistic", &cfg.alphas, cfg.seeds_per_value, &cfg.methods, master, &generate)?;
    Ok(ExperimentReport::new("logistic", master.0, echo(cfg)?, rows, start.elapsed().as_secs_f64() * 1e3))
}

pub fn run_mou_experiment(cfg: &MouExperimentConfig, master: Seed) -> Result<ExperimentReport<TrialRow>, EvalError> {
    check_grid("density", &cfg.densities, cfg.seeds_per_value)?;
    let start = Instant::now();
    let generate = |seed: Seed, density: f64| {
        let spec = MouSpec {
            sigma2: cfg.sigma2,
            t_points: cfg.t_points,
            dt: cfg.dt,
            burn_in: cfg.burn_in,
            diagonal: cfg.diagonal,
            ..MouSpec::new(cfg.n_nodes, density, seed)
        };
        let (panel, truth, _) = gen_mou(&spec)?;
        Ok((panel, truth))
    };
    let rows = run_graph_experiment("mou", &cfg.densities, cfg.seeds_per_value, &cfg.methods, master, &generate)?;
    Ok(ExperimentReport::new("mou", master.0, echo(cfg)?, rows, start.elapsed().as_secs_f64() * 1e3))
}

/// For each series: MinMax-scale the whole series, split, fit each forecaster
/// on the training segment, forecast the test horizon, and score by MAPE.
/// Forecaster failures are recorded per row and the run continues.
pub fn run_forecast_benchmark(panel: &MultiSeries, cfg: &ForecastBenchmarkConfig) -> Result<ExperimentReport<ForecastRow>, EvalError> {
    if cfg.forecasters.is_empty() {
        return Err(EvalError::InvalidConfig("no forecasters configured".into()));
    }
    let split = SplitSpec::new(cfg.train_fraction)?;
    let (train_len, horizon) = split.lengths(panel.n_rows())?;
    let start = Instant::now();
    let forecasters: Vec<Box<dyn Forecaster>> = cfg.forecasters.iter().map(|f| f.build()).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..panel.n_series()).flat_map(|s| (0..forecasters.len()).map(move |f| (s, f))).collect();
    let rows: Vec<ForecastRow> = jobs
        .par_iter()
        .map(|&(s, f)| {
            let t0 = Instant::now();
            let (scaled, _) = minmax_scale_values(panel.column(s));
            let (train, test) = scaled.split_at(train_len);
            let outcome = forecasters[f].forecast(train, test.len()).and_then(|pred| mape(test, &pred));
            let (mape, error) = match outcome {
                Ok(m) => (m, String::new()),
                Err(e) => (f64::NAN, e.to_string()),
            };
            ForecastRow {
                series: panel.names()[s].clone(),
                forecaster: cfg.forecasters[f].label(),
                train_len,
                horizon,
                mape,
                error,
                elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();
    Ok(ExperimentReport::new("forecast", 0, echo(cfg)?, rows, start.elapsed().as_secs_f64() * 1e3))
}

pub fn run_forecast_benchmark_csv(path: &Path, cfg: &ForecastBenchmarkConfig) -> Result<ExperimentReport<ForecastRow>, EvalError> {
    let panel = MultiSeries::read_csv_path(path)?;
    run_forecast_benchmark(&panel, cfg)
}

/// Synthetic benchmark panel of independent AR(1) series with unit-variance
/// innovations, a level of 10 and coefficients spread evenly over
/// `[0.95, 0.99]`, persistent enough to matter over a 60-step horizon.
pub fn synthetic_ar_panel(n_series: usize, length: usize, seed: Seed) -> Result<MultiSeries, EvalError> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    const BURN_IN: usize = 200;
    let columns = (0..n_series)
        .map(|j| {
            let phi = if n_series > 1 { 0.95 + 0.04 * j as f64 / (n_series - 1) as f64 } else { 0.97 };
            let mut rng = seed.derive("ar_panel", j as u64).stream(0);
            let mut x = 0.0;
            let mut col = Vec::with_capacity(length);
            for t in 0..BURN_IN + length {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                if t >= BURN_IN {
                    col.push(10.0 + x);
                }
            }
            col
        })
        .collect();
    let names = (1..=n_series).map(|j| format!("AR{j}")).collect();
    Ok(MultiSeries::new(names, columns)?)
}
