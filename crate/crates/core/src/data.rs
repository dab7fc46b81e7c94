//! Datasets: CSV ingestion, k-fold splitting and a synthetic biased generator.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Features plus binary label `y` and binary sensitive attribute `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    pub x: Array2<T>,
    pub y: Vec<u8>,
    pub a: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Checks shape agreement, finiteness and that both classes of `y` and
    /// both groups of `a` occur.
    pub fn new(
        name: impl Into<String>,
        x: Array2<T>,
        y: Vec<u8>,
        a: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || a.len() != n {
            return Err(Error::Dimension(format!(
                "{n} feature rows, {} labels, {} attributes",
                y.len(),
                a.len()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} feature columns but {} names",
                x.ncols(),
                feature_names.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        for (what, v) in [("y", &y), ("a", &a)] {
            if v.iter().any(|&b| b > 1) {
                return Err(Error::InvalidParameter(format!("{what} must be 0 or 1")));
            }
            let ones = v.iter().filter(|&&b| b == 1).count();
            if ones == 0 || ones == n {
                return Err(Error::DegenerateLabels(format!("{what} contains a single value")));
            }
        }
        Ok(Self {
            name: name.into(),
            x,
            y,
            a,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `idx`, in the given order. No class-balance validation.
    pub fn subset(&self, idx: &[usize]) -> Subset<T> {
        Subset {
            x: self.x.select(ndarray::Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
        }
    }

    /// Writes the dataset as CSV with the label and sensitive columns last.
    pub fn write_csv(&self, path: impl AsRef<Path>, label_column: &str, sensitive_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        header.push(sensitive_column);
        w.write_record(&header)?;
        for (i, row) in self.x.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.as_f64().to_string()).collect();
            rec.push(self.y[i].to_string());
            rec.push(self.a[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A row selection of a [`Dataset`].
#[derive(Debug, Clone)]
pub struct Subset<T> {
    pub x: Array2<T>,
    pub y: Vec<u8>,
    pub a: Vec<u8>,
}

/// Where a dataset lives on disk and how to read its special columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub csv_path: PathBuf,
    pub label_column: String,
    /// Value of the label column that means `Y = 1`; 0/1 columns need none.
    #[serde(default)]
    pub positive_label_value: Option<String>,
    pub sensitive_column: String,
    /// Value of the sensitive column that means `A = 1`.
    #[serde(default)]
    pub sensitive_positive_value: Option<String>,
    #[serde(default)]
    pub drop_column_prefixes: Vec<String>,
}

const MIN_ROWS: usize = 10;

fn parse_binary(cell: &str, positive: Option<&str>, row: usize, column: &str) -> Result<u8> {
    let cell = cell.trim();
    let numeric = cell.parse::<f64>().ok();
    if let Some(pos) = positive {
        let pos = pos.trim();
        let hit = match (numeric, pos.parse::<f64>().ok()) {
            (Some(c), Some(p)) => c == p,
            _ => cell == pos,
        };
        if cell.is_empty() {
            return Err(Error::Parse {
                row,
                column: column.to_string(),
                message: "missing value".into(),
            });
        }
        return Ok(u8::from(hit));
    }
    match numeric {
        Some(0.0) => Ok(0),
        Some(1.0) => Ok(1),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("expected 0 or 1, found `{cell}`"),
        }),
    }
}

/// Reads a preprocessed benchmark CSV.
///
/// The label and sensitive columns are split off, columns whose name
/// starts with any drop prefix are discarded and every remaining column is
/// parsed as a real feature. Rows are numbered from 1 (header excluded) in
/// error messages.
pub fn load_csv<T: Scalar>(name: impl Into<String>, spec: &DatasetSpec) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&spec.csv_path)?;
    let headers = reader.headers()?.clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))
    };
    let label_idx = find(&spec.label_column)?;
    let sens_idx = find(&spec.sensitive_column)?;
    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && i != sens_idx)
        .filter(|&i| {
            !spec
                .drop_column_prefixes
                .iter()
                .any(|p| headers[i].starts_with(p.as_str()))
        })
        .collect();
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut a = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        y.push(parse_binary(
            &record[label_idx],
            spec.positive_label_value.as_deref(),
            row,
            &spec.label_column,
        )?);
        a.push(parse_binary(
            &record[sens_idx],
            spec.sensitive_positive_value.as_deref(),
            row,
            &spec.sensitive_column,
        )?);
        for &i in &feature_idx {
            let cell = &record[i];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[i].to_string(),
                message: if cell.is_empty() {
                    "missing value".into()
                } else {
                    format!("cannot parse `{cell}` as a number")
                },
            })?;
            values.push(T::lit(v));
        }
    }
    let n = y.len();
    if n < MIN_ROWS {
        return Err(Error::InvalidParameter(format!(
            "{} has {n} data rows, need at least {MIN_ROWS}",
            spec.csv_path.display()
        )));
    }
    let x = Array2::from_shape_vec((n, feature_idx.len()), values)
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Dataset::new(name, x, y, a, feature_names)
}

/// Train/test index sets of one fold. Both are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffled k-fold partition of `0..n`; the first `n % k` folds get one
/// extra test row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = perm[start..start + size].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

/// Generator parameters for [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Strength of the direct effect of `a` on the latent score, in `[0, 1]`.
    pub bias: f64,
    /// Label flip probability, in `[0, 0.5]`.
    pub noise: f64,
}

const INFORMATIVE: [f64; 3] = [1.0, 0.7, -0.5];
const BIAS_SCALE: f64 = 2.0;
const PROXY_SHIFT: f64 = 3.0;

/// Draws a biased binary-classification dataset.
///
/// `a ~ Bernoulli(0.5)`. Three standard-normal features drive the latent
/// score `s = x·β + 2·bias·(2a - 1)`; `y = [s > 0]` with each label then
/// flipped with probability `noise`. A fourth feature is a noisy proxy of
/// `a` (`3·(2a - 1) + N(0, 1)`) that does not enter the score, and a
/// fifth is pure noise. With `bias = 0` the label is independent of `a`.
pub fn synthesize<T: Scalar>(spec: SyntheticSpec, seed: u64) -> Result<Dataset<T>> {
    let SyntheticSpec { n, bias, noise } = spec;
    if n < 20 {
        return Err(Error::InvalidParameter(format!("n must be at least 20, got {n}")));
    }
    if !(0.0..=1.0).contains(&bias) {
        return Err(Error::InvalidParameter(format!("bias {bias} outside [0, 1]")));
    }
    if !(0.0..=0.5).contains(&noise) {
        return Err(Error::InvalidParameter(format!("noise {noise} outside [0, 0.5]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = INFORMATIVE.len() + 2;
    let mut values = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    for _ in 0..n {
        let ai: u8 = u8::from(rng.gen_bool(0.5));
        let sign = if ai == 1 { 1.0 } else { -1.0 };
        let mut score = BIAS_SCALE * bias * sign;
        for beta in INFORMATIVE {
            let v: f64 = rng.sample(StandardNormal);
            score += beta * v;
            values.push(T::lit(v));
        }
        let proxy: f64 = rng.sample(StandardNormal);
        values.push(T::lit(PROXY_SHIFT * sign + proxy));
        let junk: f64 = rng.sample(StandardNormal);
        values.push(T::lit(junk));
        let mut yi = u8::from(score > 0.0);
        if rng.gen_bool(noise) {
            yi = 1 - yi;
        }
        y.push(yi);
        a.push(ai);
    }
    let x = Array2::from_shape_vec((n, p), values).map_err(|e| Error::Dimension(e.to_string()))?;
    let names = vec![
        "x1".to_string(),
        "x2".to_string(),
        "x3".to_string(),
        "proxy".to_string(),
        "noise".to_string(),
    ];
    Dataset::new("synthetic", x, y, a, names)
}
