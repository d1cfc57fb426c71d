//! Per-row experiment records, their aggregates, and CSV/JSON serialisation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::stats::mean_var;

/// One causal-discovery trial: a panel, one method, one score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub experiment: String,
    pub method: String,
    /// Coupling α or density d.
    pub param: f64,
    pub trial: u64,
    pub seed: u64,
    pub n_true: usize,
    pub n_pred: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub sign_mismatch: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub false_positives: String,
    pub false_negatives: String,
    /// Empty unless the trial failed; metrics are NaN then.
    pub error: String,
    pub elapsed_ms: f64,
}

/// One forecaster on one series of the benchmark panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub series: String,
    pub forecaster: String,
    pub train_len: usize,
    pub horizon: usize,
    pub mape: f64,
    pub error: String,
    pub elapsed_ms: f64,
}

/// Row types that can be grouped and summarised.
pub trait ReportRow: Serialize + DeserializeOwned + Clone {
    /// Column whose presence in a CSV header identifies the row type.
    const KEY_COLUMN: &'static str;

    fn group(&self) -> &str;

    fn param(&self) -> Option<f64>;

    fn failed(&self) -> bool;

    fn metrics(&self) -> Vec<(&'static str, f64)>;
}

impl ReportRow for TrialRow {
    const KEY_COLUMN: &'static str = "sign_mismatch";

    fn group(&self) -> &str {
        &self.method
    }

    fn param(&self) -> Option<f64> {
        Some(self.param)
    }

    fn failed(&self) -> bool {
        !self.error.is_empty()
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("sign_mismatch", self.sign_mismatch),
            ("fp", self.fp as f64),
            ("fn", self.fn_ as f64),
            ("precision_undefined", f64::from(u8::from(self.precision_undefined))),
            ("recall_undefined", f64::from(u8::from(self.recall_undefined))),
        ]
    }
}

impl ReportRow for ForecastRow {
    const KEY_COLUMN: &'static str = "forecaster";

    fn group(&self) -> &str {
        &self.forecaster
    }

    fn param(&self) -> Option<f64> {
        None
    }

    fn failed(&self) -> bool {
        !self.error.is_empty()
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![("mape", self.mape)]
    }
}

/// Mean and population variance (ddof = 0) of one metric over the
/// successful rows of a group. `param` is empty for the all-trials pooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub param: Option<f64>,
    pub metric: String,
    pub n: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
}

impl Aggregate {
    fn from_values(group: &str, param: Option<f64>, metric: &str, values: &[f64], n_failed: usize) -> Self {
        let (mean, variance) = if values.is_empty() { (f64::NAN, f64::NAN) } else { mean_var(values) };
        Aggregate {
            group: group.to_string(),
            param,
            metric: metric.to_string(),
            n: values.len(),
            n_failed,
            mean,
            variance,
            std: variance.sqrt(),
        }
    }
}

/// Summaries per group, pooled over all params and (when rows carry one)
/// per param value. Output order is deterministic: group name, then
/// pooled before per-param in ascending order, then metric order.
pub fn aggregate<R: ReportRow>(rows: &[R]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<&str, Vec<&R>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.group()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (group, members) in groups {
        let mut params: Vec<f64> = members.iter().filter_map(|r| r.param()).collect();
        params.sort_by(f64::total_cmp);
        params.dedup();
        let mut buckets: Vec<(Option<f64>, Vec<&R>)> = vec![(None, members.clone())];
        for p in params {
            buckets.push((Some(p), members.iter().copied().filter(|r| r.param() == Some(p)).collect()));
        }
        for (param, bucket) in buckets {
            let ok: Vec<&R> = bucket.iter().copied().filter(|r| !r.failed()).collect();
            let n_failed = bucket.len() - ok.len();
            let names: Vec<&'static str> = match bucket.first() {
                Some(r) => r.metrics().into_iter().map(|(name, _)| name).collect(),
                None => continue,
            };
            for (k, name) in names.iter().enumerate() {
                let values: Vec<f64> = ok.iter().map(|r| r.metrics()[k].1).collect();
                out.push(Aggregate::from_values(group, param, name, &values, n_failed));
            }
        }
    }
    out
}

/// Looks up one aggregate.
pub fn find_aggregate<'a>(aggs: &'a [Aggregate], group: &str, param: Option<f64>, metric: &str) -> Option<&'a Aggregate> {
    aggs.iter().find(|a| a.group == group && a.param == param && a.metric == metric)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<R> {
    pub experiment: String,
    pub master_seed: u64,
    /// The configuration the run used, verbatim.
    pub config: serde_json::Value,
    pub rows: Vec<R>,
    pub aggregates: Vec<Aggregate>,
    pub elapsed_ms: f64,
}

/// Files written by [`ExperimentReport::write_all`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub json: PathBuf,
}

impl<R: ReportRow> ExperimentReport<R> {
    pub fn new(experiment: &str, master_seed: u64, config: serde_json::Value, rows: Vec<R>, elapsed_ms: f64) -> Self {
        let aggregates = aggregate(&rows);
        Self { experiment: experiment.to_string(), master_seed, config, rows, aggregates, elapsed_ms }
    }

    pub fn write_rows_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        write_rows_csv(&self.rows, writer)
    }

    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        write_summary_csv(&self.aggregates, writer)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// Writes `<stem>_rows.csv`, `<stem>_summary.csv` and `<stem>.json` into `dir`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<ReportPaths, EvalError> {
        std::fs::create_dir_all(dir)?;
        let paths = ReportPaths {
            rows: dir.join(format!("{stem}_rows.csv")),
            summary: dir.join(format!("{stem}_summary.csv")),
            json: dir.join(format!("{stem}.json")),
        };
        self.write_rows_csv(std::fs::File::create(&paths.rows)?)?;
        self.write_summary_csv(std::fs::File::create(&paths.summary)?)?;
        self.write_json(std::io::BufWriter::new(std::fs::File::create(&paths.json)?))?;
        Ok(paths)
    }
}

pub fn write_rows_csv<R: Serialize, W: Write>(rows: &[R], writer: W) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: DeserializeOwned, Rd: Read>(reader: Rd) -> Result<Vec<R>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(EvalError::from)).collect()
}

pub fn write_summary_csv<W: Write>(aggs: &[Aggregate], writer: W) -> Result<(), EvalError> {
    write_rows_csv(aggs, writer)
}

pub fn read_summary_csv<Rd: Read>(reader: Rd) -> Result<Vec<Aggregate>, EvalError> {
    read_rows_csv(reader)
}

/// Row CSVs understood by the `report` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum RowTable {
    Trials(Vec<TrialRow>),
    Forecasts(Vec<ForecastRow>),
}

impl RowTable {
    /// Detects the row type from the header and parses the file.
    pub fn read_path(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)?;
        let header = text.lines().next().unwrap_or_default();
        let has = |col: &str| header.split(',').any(|h| h.trim() == col);
        if has(TrialRow::KEY_COLUMN) {
            Ok(RowTable::Trials(read_rows_csv(text.as_bytes())?))
        } else if has(ForecastRow::KEY_COLUMN) {
            Ok(RowTable::Forecasts(read_rows_csv(text.as_bytes())?))
        } else {
            Err(EvalError::InvalidConfig(format!("{}: not a trial or forecast row table", path.display())))
        }
    }

    pub fn aggregate(&self) -> Vec<Aggregate> {
        match self {
            RowTable::Trials(rows) => aggregate(rows),
            RowTable::Forecasts(rows) => aggregate(rows),
        }
    }
}
