//! Series and panel value types, MinMax scaling, train/test splitting,
//! seeded random streams and the CSV panel format.
//!
//! All randomness in the crate flows through [`Seed::stream`], which hands out
//! a ChaCha20 generator keyed by the 64-bit seed and positioned on an explicit
//! stream number. ChaCha is counter based, so distinct streams never overlap
//! and draws do not depend on thread scheduling.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series '{name}' is empty")]
    Empty { name: String },
    #[error("series '{name}' has a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
    #[error("panel needs at least {min} rows, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("panel has no columns")]
    NoColumns,
    #[error("column '{name}' has length {got}, expected {expected}")]
    RaggedColumns { name: String, got: usize, expected: usize },
    #[error("duplicate series name '{0}'")]
    DuplicateName(String),
    #[error("{0} names for {1} columns")]
    NameCount(usize, usize),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("split of {rows} rows at fraction {fraction} leaves train={train}, test={test} (need train >= 2, test >= 1)")]
    SplitTooShort { rows: usize, fraction: f64, train: usize, test: usize },
    #[error("uniform range requires lo < hi, got [{lo}, {hi})")]
    BadRange { lo: f64, hi: f64 },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    CsvLib(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single named, uniformly sampled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self, SeriesError> {
        let name = name.into();
        validate_values(&name, &values)?;
        Ok(Self { name, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn validate_values(name: &str, values: &[f64]) -> Result<(), SeriesError> {
    if values.is_empty() {
        return Err(SeriesError::Empty { name: name.to_string() });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(SeriesError::NonFinite { name: name.to_string(), index });
    }
    Ok(())
}

/// A T×N panel stored column-wise: column `j` is series `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeries {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl MultiSeries {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, SeriesError> {
        if columns.is_empty() {
            return Err(SeriesError::NoColumns);
        }
        if names.len() != columns.len() {
            return Err(SeriesError::NameCount(names.len(), columns.len()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(SeriesError::DuplicateName(name.clone()));
            }
        }
        let rows = columns[0].len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != rows {
                return Err(SeriesError::RaggedColumns {
                    name: name.clone(),
                    got: col.len(),
                    expected: rows,
                });
            }
            validate_values(name, col)?;
        }
        if rows < 2 {
            return Err(SeriesError::TooShort { min: 2, got: rows });
        }
        Ok(Self { names, columns })
    }

    /// Builds a panel with default names `X1..XN`.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self, SeriesError> {
        let names = (1..=columns.len()).map(|i| format!("X{i}")).collect();
        Self::new(names, columns)
    }

    pub fn from_series(series: Vec<TimeSeries>) -> Result<Self, SeriesError> {
        let (names, columns) = series.into_iter().map(|s| (s.name, s.values)).unzip();
        Self::new(names, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_series(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn series(&self, j: usize) -> TimeSeries {
        TimeSeries { name: self.names[j].clone(), values: self.columns[j].clone() }
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    /// Rows `[start, end)` as a new panel; callers guarantee at least two rows.
    fn slice_rows(&self, start: usize, end: usize) -> Self {
        Self {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }

    /// Reads the CSV panel format: a header of series names followed by one
    /// row per time point.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SeriesError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != names.len() {
                return Err(SeriesError::Csv {
                    line,
                    msg: format!("expected {} cells, found {}", names.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                if cell.is_empty() {
                    return Err(SeriesError::Csv { line, msg: format!("missing value in column '{}'", names[j]) });
                }
                let v: f64 = cell.parse().map_err(|_| SeriesError::Csv {
                    line,
                    msg: format!("'{cell}' is not a decimal number"),
                })?;
                columns[j].push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn read_csv_path(path: &std::path::Path) -> Result<Self, SeriesError> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SeriesError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        for t in 0..self.n_rows() {
            // `{}` on f64 prints the shortest string that round-trips.
            wtr.write_record(self.columns.iter().map(|c| c[t].to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Parameters needed to undo [`minmax_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min: f64,
    pub max: f64,
}

impl ScaleParams {
    /// True when the source series was constant and scaled to all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }

    pub fn unscale(&self, values: &[f64]) -> Vec<f64> {
        let range = self.max - self.min;
        values.iter().map(|v| v * range + self.min).collect()
    }
}

/// Affine map onto `[0, 1]`. A constant series maps to all zeros with
/// `max == min` recorded in the params.
pub fn minmax_scale(s: &TimeSeries) -> (TimeSeries, ScaleParams) {
    let (scaled, params) = minmax_scale_values(&s.values);
    (TimeSeries { name: s.name.clone(), values: scaled }, params)
}

pub fn minmax_scale_values(values: &[f64]) -> (Vec<f64>, ScaleParams) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let scaled = if range > 0.0 {
        values.iter().map(|v| ((v - min) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; values.len()]
    };
    (scaled, ScaleParams { min, max })
}

/// Fraction of rows assigned to the training segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self, SeriesError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(SeriesError::BadFraction(train_fraction));
        }
        Ok(Self { train_fraction })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    /// `(train_len, test_len)` for a panel of `rows` rows.
    pub fn lengths(&self, rows: usize) -> Result<(usize, usize), SeriesError> {
        let train = (rows as f64 * self.train_fraction).floor() as usize;
        let test = rows.saturating_sub(train);
        if train < 2 || test < 1 {
            return Err(SeriesError::SplitTooShort { rows, fraction: self.train_fraction, train, test });
        }
        Ok((train, test))
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.9 }
    }
}

/// Splits a panel into its first `floor(T·f)` rows and the remainder.
///
/// The test segment may hold a single row, so it is returned as raw columns
/// wrapped in a panel only when it has at least two rows; use
/// [`split_columns`] when the test horizon can be 1.
pub fn split(m: &MultiSeries, spec: SplitSpec) -> Result<(MultiSeries, MultiSeries), SeriesError> {
    let (train, test) = spec.lengths(m.n_rows())?;
    if test < 2 {
        return Err(SeriesError::SplitTooShort {
            rows: m.n_rows(),
            fraction: spec.train_fraction,
            train,
            test,
        });
    }
    Ok((m.slice_rows(0, train), m.slice_rows(train, m.n_rows())))
}

/// Column-wise split that tolerates a single-row test segment.
pub fn split_columns(values: &[f64], spec: SplitSpec) -> Result<(&[f64], &[f64]), SeriesError> {
    let (train, _) = spec.lengths(values.len())?;
    Ok(values.split_at(train))
}

/// Reproducibility seed for every generator in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    /// ChaCha20 keyed from the seed (via `SeedableRng::seed_from_u64`) on
    /// the given stream. The generator is fixed for the crate's lifetime.
    pub fn stream(self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// Derives an independent child seed by hashing `(self, tag, index)`.
    pub fn derive(self, tag: &str, index: u64) -> Seed {
        let mut h = fnv1a(FNV_OFFSET, &self.0.to_le_bytes());
        h = fnv1a(h, tag.as_bytes());
        h = fnv1a(h, &index.to_le_bytes());
        Seed(splitmix64(h))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `n` i.i.d. draws from `U(lo, hi)` on stream 0 of `seed`.
pub fn rng_uniform(seed: Seed, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, SeriesError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SeriesError::BadRange { lo, hi });
    }
    let mut rng = seed.stream(0);
    Ok((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new("s", v.to_vec()).unwrap()
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_scale(&ts(&[1.0, 2.0, 3.0])).0.values(), &[0.0, 0.5, 1.0]);
        let (c, p) = minmax_scale(&ts(&[5.0, 5.0, 5.0]));
        assert_eq!(c.values(), &[0.0, 0.0, 0.0]);
        assert!(p.is_degenerate());
        let (s, _) = minmax_scale(&ts(&[0.2, 0.6, 0.4]));
        for (a, b) in s.values().iter().zip([0.0, 1.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(TimeSeries::new("x", vec![]), Err(SeriesError::Empty { .. })));
        assert!(matches!(
            TimeSeries::new("x", vec![1.0, f64::NAN]),
            Err(SeriesError::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            MultiSeries::new(vec!["a".into(), "a".into()], vec![vec![1.0, 2.0], vec![3.0, 4.0]]),
            Err(SeriesError::DuplicateName(_))
        ));
        assert!(matches!(MultiSeries::from_columns(vec![vec![1.0]]), Err(SeriesError::TooShort { .. })));
        assert!(matches!(
            MultiSeries::from_columns(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(SeriesError::RaggedColumns { .. })
        ));
    }

    #[test]
    fn split_examples() {
        let spec = SplitSpec::new(0.9).unwrap();
        assert_eq!(spec.lengths(600).unwrap(), (540, 60));
        assert_eq!(spec.lengths(100).unwrap(), (90, 10));
        assert_eq!(SplitSpec::new(0.5).unwrap().lengths(10).unwrap(), (5, 5));
        assert!(spec.lengths(2).is_err());
        assert!(SplitSpec::new(1.0).is_err());
        assert!(SplitSpec::new(0.0).is_err());

        let m = MultiSeries::from_columns(vec![(0..10).map(f64::from).collect()]).unwrap();
        let (a, b) = split(&m, SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!(a.column(0), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(b.column(0), &[5.0, 6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn uniform_examples() {
        assert!(rng_uniform(Seed(7), -0.01, 0.01, 0).unwrap().is_empty());
        assert!(rng_uniform(Seed(7), 0.01, 0.01, 3).is_err());
        let a = rng_uniform(Seed(7), -0.01, 0.01, 100_000).unwrap();
        let b = rng_uniform(Seed(7), -0.01, 0.01, 100_000).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (-0.01..0.01).contains(v)));
        // sigma = 0.02/sqrt(12); 3 sigma / sqrt(n)
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 3.0 * 0.02 / 12f64.sqrt() / (1e5f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn derived_seeds_differ() {
        let s = Seed(1);
        assert_ne!(s.derive("a", 0), s.derive("a", 1));
        assert_ne!(s.derive("a", 0), s.derive("b", 0));
        assert_eq!(s.derive("a", 3), s.derive("a", 3));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = MultiSeries::new(
            vec!["roi_a".into(), "roi_b".into()],
            vec![vec![0.1, 0.25, 1.0 / 3.0], vec![-1.5, 2e-9, 7.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(MultiSeries::read_csv(buf.as_slice()).unwrap(), m);

        let missing = "a,b\n1,2\n3,\n";
        assert!(matches!(MultiSeries::read_csv(missing.as_bytes()), Err(SeriesError::Csv { line: 3, .. })));
        let bad = "a\n1\nx\n";
        assert!(MultiSeries::read_csv(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn minmax_round_trip(v in prop::collection::vec(-1e6f64..1e6, 2..50)) {
            let s = ts(&v);
            let (scaled, params) = minmax_scale(&s);
            prop_assert!(scaled.values().iter().all(|x| (0.0..=1.0).contains(x)));
            if !params.is_degenerate() {
                let back = params.unscale(scaled.values());
                let scale = v.iter().fold(0f64, |m, x| m.max(x.abs())).max(1e-300);
                for (a, b) in back.iter().zip(&v) {
                    prop_assert!((a - b).abs() <= 1e-12 * scale.max(params.max - params.min));
                }
            }
        }

        #[test]
        fn split_partitions(rows in 4usize..300, f in 0.05f64..0.95) {
            let m = MultiSeries::from_columns(vec![(0..rows).map(|i| i as f64).collect()]).unwrap();
            let spec = SplitSpec::new(f).unwrap();
            if let Ok((a, b)) = split(&m, spec) {
                let mut joined = a.column(0).to_vec();
                joined.extend_from_slice(b.column(0));
                prop_assert_eq!(joined.as_slice(), m.column(0));
            }
        }
    }
}
