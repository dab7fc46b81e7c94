//! λ selection, μ sweeps over regularizer kinds, aggregation and persistence.
//!
//! Every `(kind, μ, fold)` cell of a sweep is trained independently on the
//! same fold split, so cells are paired across kinds and μ values. Cells run
//! on the ambient rayon pool; results are sorted before they are returned so
//! the output does not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{kfold_split, Dataset, Fold};
use crate::error::{Error, Result};
use crate::fairness::FairnessReport;
use crate::model::{cross_entropy, evaluate, fit, TrainConfig};
use crate::optim::StopReason;
use crate::regularizers::RegularizerKind;
use crate::scalar::Scalar;

/// μ values used when a run does not specify any: 0, 5, ..., 100.
pub fn default_mu_grid() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) * 5.0).collect()
}

/// Solver settings shared by every cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-6,
        }
    }
}

fn train_config<T: Scalar>(
    lambda: f64,
    mu: f64,
    kind: RegularizerKind,
    solver: SolverSettings,
    seed: u64,
) -> TrainConfig<T> {
    TrainConfig {
        lambda: T::lit(lambda),
        mu: T::lit(mu),
        kind,
        max_iter: solver.max_iter,
        grad_tol: T::lit(solver.grad_tol),
        seed,
    }
}

/// Outcome of λ tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// `(candidate, mean held-out cross-entropy)`, ascending in λ.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the L2 weight with the lowest mean held-out cross-entropy over
/// `k` folds, training without any fairness term. Ties go to the larger λ.
pub fn tune_lambda<T: Scalar>(
    ds: &Dataset<T>,
    candidates: &[f64],
    k: usize,
    seed: u64,
    solver: SolverSettings,
) -> Result<LambdaSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no λ candidates given".into()));
    }
    if let Some(bad) = candidates.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(Error::InvalidParameter(format!("λ candidate {bad} is not a finite value ≥ 0")));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let folds = kfold_split(ds.len(), k, seed)?;
    let jobs: Vec<(usize, usize)> = (0..sorted.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let losses: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let cfg = train_config::<T>(sorted[c], 0.0, RegularizerKind::None, solver, seed);
            let train = ds.subset(&folds[f].train);
            let test = ds.subset(&folds[f].test);
            let (w, _) = fit(train.x.view(), &train.y, &train.a, &cfg)?;
            Ok(cross_entropy(&w, test.x.view(), &test.y)?.as_f64())
        })
        .collect();
    let mut scores = Vec::with_capacity(sorted.len());
    for (c, &lambda) in sorted.iter().enumerate() {
        let mut total = 0.0;
        for f in 0..folds.len() {
            match &losses[c * folds.len() + f] {
                Ok(v) => total += v,
                Err(e) => return Err(Error::Fit(format!("λ = {lambda}, fold {f}: {e}"))),
            }
        }
        scores.push((lambda, total / folds.len() as f64));
    }
    let (lambda, _) = scores
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, (l, s)| match best {
            Some((_, bs)) if s > bs => best,
            _ => Some((l, s)),
        })
        .expect("at least one candidate");
    Ok(LambdaSelection { lambda, scores })
}

/// How a cell's fit ended.
#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Converged,
    MaxIterations,
    LineSearchStalled,
    Failed(String),
}

impl CellStatus {
    pub fn is_failure(&self) -> bool {
        matches!(self, CellStatus::Failed(_))
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellStatus::Converged => f.write_str("ok"),
            CellStatus::MaxIterations => f.write_str("max_iter"),
            CellStatus::LineSearchStalled => f.write_str("stalled"),
            CellStatus::Failed(msg) => write!(f, "failed: {msg}"),
        }
    }
}

impl std::str::FromStr for CellStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(CellStatus::Converged),
            "max_iter" => Ok(CellStatus::MaxIterations),
            "stalled" => Ok(CellStatus::LineSearchStalled),
            _ => match s.strip_prefix("failed: ") {
                Some(msg) => Ok(CellStatus::Failed(msg.to_string())),
                None => Err(Error::Schema(format!("unknown cell status `{s}`"))),
            },
        }
    }
}

/// Held-out metrics of one trained cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub report: FairnessReport<f64>,
    pub accuracy_fraction: f64,
    pub cross_entropy: f64,
}

/// One `(dataset, kind, μ, fold)` result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub dataset: String,
    pub kind: RegularizerKind,
    pub mu: f64,
    pub fold: usize,
    /// `None` exactly when the cell failed.
    pub metrics: Option<CellMetrics>,
    pub wall_time_s: f64,
    pub status: CellStatus,
}

impl SweepRecord {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        if metric == Metric::WallTime {
            return Some(self.wall_time_s);
        }
        let m = self.metrics.as_ref()?;
        let r = &m.report;
        match metric {
            Metric::Ind => Some(r.ind),
            Metric::Sep => Some(r.sep),
            Metric::Suf => Some(r.suf),
            Metric::AccMi => Some(r.acc),
            Metric::NegAcc => Some(-r.acc),
            Metric::Bal => Some(r.bal),
            Metric::NInd => r.n_ind,
            Metric::NSep => r.n_sep,
            Metric::NSuf => r.n_suf,
            Metric::AccuracyFraction => Some(m.accuracy_fraction),
            Metric::CrossEntropy => Some(m.cross_entropy),
            Metric::WallTime => unreachable!(),
        }
    }
}

/// Sorted, deduplicated μ grid that always contains 0.
pub fn normalize_mu_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("μ grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::InvalidParameter(format!("μ value {bad} is not a finite value ≥ 0")));
    }
    let mut out: Vec<f64> = grid.iter().map(|&m| if m == 0.0 { 0.0 } else { m }).collect();
    out.push(0.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn run_cell<T: Scalar>(
    ds: &Dataset<T>,
    fold: &Fold,
    cfg: &TrainConfig<T>,
) -> Result<(CellMetrics, StopReason)> {
    let train = ds.subset(&fold.train);
    let test = ds.subset(&fold.test);
    let (w, diag) = fit(train.x.view(), &train.y, &train.a, cfg)?;
    let ev = evaluate(&w, test.x.view(), &test.y, &test.a)?;
    Ok((
        CellMetrics {
            report: ev.report.to_f64(),
            accuracy_fraction: ev.accuracy_fraction.as_f64(),
            cross_entropy: ev.cross_entropy.as_f64(),
        },
        diag.stop,
    ))
}

/// Trains and evaluates every `(kind, μ, fold)` cell.
///
/// A failing cell yields a record with [`CellStatus::Failed`] and no
/// metrics; the rest of the sweep continues. Errors are returned only for
/// invalid sweep parameters.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep<T: Scalar>(
    ds: &Dataset<T>,
    lambda: f64,
    kinds: &[RegularizerKind],
    mu_grid: &[f64],
    k: usize,
    seed: u64,
    solver: SolverSettings,
) -> Result<Vec<SweepRecord>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!("λ = {lambda} must be finite and ≥ 0")));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidParameter("no regularizer kinds given".into()));
    }
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let mus = normalize_mu_grid(mu_grid)?;
    let folds = kfold_split(ds.len(), k, seed)?;

    let cells: Vec<(RegularizerKind, f64, usize)> = kinds
        .iter()
        .flat_map(|&kind| {
            let folds = &folds;
            mus.iter()
                .flat_map(move |&mu| (0..folds.len()).map(move |f| (kind, mu, f)))
        })
        .collect();

    let mut records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(kind, mu, f)| {
            let cfg = train_config::<T>(lambda, mu, kind, solver, seed);
            let start = Instant::now();
            let outcome = run_cell(ds, &folds[f], &cfg);
            let wall_time_s = start.elapsed().as_secs_f64();
            let (metrics, status) = match outcome {
                Ok((m, stop)) => (
                    Some(m),
                    match stop {
                        StopReason::GradientTolerance => CellStatus::Converged,
                        StopReason::MaxIterations => CellStatus::MaxIterations,
                        StopReason::LineSearchFailed => CellStatus::LineSearchStalled,
                    },
                ),
                Err(e) => (None, CellStatus::Failed(e.to_string())),
            };
            SweepRecord {
                dataset: ds.name.clone(),
                kind,
                mu,
                fold: f,
                metrics,
                wall_time_s,
                status,
            }
        })
        .collect();
    sort_records(&mut records);
    Ok(records)
}

pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.kind.cmp(&b.kind))
            .then(a.mu.total_cmp(&b.mu))
            .then(a.fold.cmp(&b.fold))
    });
}

/// Quantities tracked per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ind,
    Sep,
    Suf,
    AccMi,
    /// `-I(Y;R)`; derived from [`Metric::AccMi`], not stored separately.
    NegAcc,
    Bal,
    NInd,
    NSep,
    NSuf,
    AccuracyFraction,
    CrossEntropy,
    WallTime,
}

impl Metric {
    /// Metrics with stored summary columns, in file order.
    pub const SUMMARY: [Metric; 11] = [
        Metric::Ind,
        Metric::Sep,
        Metric::Suf,
        Metric::AccMi,
        Metric::Bal,
        Metric::NInd,
        Metric::NSep,
        Metric::NSuf,
        Metric::AccuracyFraction,
        Metric::CrossEntropy,
        Metric::WallTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ind => "ind",
            Metric::Sep => "sep",
            Metric::Suf => "suf",
            Metric::AccMi => "acc_mi",
            Metric::NegAcc => "neg_acc",
            Metric::Bal => "bal",
            Metric::NInd => "n_ind",
            Metric::NSep => "n_sep",
            Metric::NSuf => "n_suf",
            Metric::AccuracyFraction => "accuracy_fraction",
            Metric::CrossEntropy => "cross_entropy",
            Metric::WallTime => "wall_time_s",
        }
    }

    pub fn is_normalized(self) -> bool {
        matches!(self, Metric::NInd | Metric::NSep | Metric::NSuf)
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::SUMMARY
            .into_iter()
            .chain([Metric::NegAcc])
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown metric `{s}`")))
    }
}

/// Mean and standard deviation of one metric over a cell's folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Fold aggregate of one `(dataset, kind, μ)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub kind: RegularizerKind,
    pub mu: f64,
    /// Folds that produced metrics.
    pub folds: usize,
    /// Whether every expected fold is present and succeeded.
    pub complete: bool,
    /// Indexed like [`Metric::SUMMARY`]; `None` when no fold defined it.
    pub stats: Vec<Option<Stat>>,
}

impl SummaryRow {
    pub fn stat(&self, metric: Metric) -> Option<Stat> {
        if metric == Metric::NegAcc {
            return self
                .stat(Metric::AccMi)
                .map(|s| Stat { mean: -s.mean, std: s.std });
        }
        let idx = Metric::SUMMARY.iter().position(|&m| m == metric)?;
        self.stats[idx]
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.stat(metric).map(|s| s.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSummary {
    pub rows: Vec<SummaryRow>,
}

impl SweepSummary {
    pub fn row(&self, dataset: &str, kind: RegularizerKind, mu: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.kind == kind && r.mu == mu)
    }

    /// Incomplete cells as `(dataset, kind, μ)`.
    pub fn incomplete(&self) -> Vec<(String, RegularizerKind, f64)> {
        self.rows
            .iter()
            .filter(|r| !r.complete)
            .map(|r| (r.dataset.clone(), r.kind, r.mu))
            .collect()
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; zero for a
/// single value or identical values).
pub fn mean_std(values: &[f64]) -> Option<Stat> {
    let first = *values.first()?;
    if values.iter().all(|&v| v == first) {
        return Some(Stat { mean: first, std: 0.0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some(Stat {
        mean,
        std: (ss / (n - 1.0)).sqrt(),
    })
}

/// Aggregates records per `(dataset, kind, μ)`. Cells with fewer than `k`
/// successful folds are kept but marked incomplete.
pub fn summarize(records: &[SweepRecord], k: usize) -> SweepSummary {
    let mut groups: BTreeMap<(String, RegularizerKind, u64), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.kind, r.mu.to_bits()))
            .or_default()
            .push(r);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((dataset, kind, mu_bits), recs)| {
            let ok: Vec<&&SweepRecord> = recs.iter().filter(|r| r.metrics.is_some()).collect();
            let mut fold_ids: Vec<usize> = ok.iter().map(|r| r.fold).collect();
            fold_ids.sort_unstable();
            fold_ids.dedup();
            let stats = Metric::SUMMARY
                .iter()
                .map(|&m| {
                    let vals: Vec<f64> = ok.iter().filter_map(|r| r.value(m)).collect();
                    mean_std(&vals)
                })
                .collect();
            SummaryRow {
                dataset,
                kind,
                mu: f64::from_bits(mu_bits),
                folds: ok.len(),
                complete: fold_ids.len() == k && ok.len() == recs.len() && fold_ids.iter().all(|&f| f < k),
                stats,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.kind.cmp(&b.kind))
            .then(a.mu.total_cmp(&b.mu))
    });
    SweepSummary { rows }
}

/// Column names of a records file, in order.
pub const RECORD_HEADER: [&str; 20] = [
    "dataset",
    "kind",
    "mu",
    "fold",
    "ind",
    "sep",
    "suf",
    "acc_mi",
    "bal",
    "n_ind",
    "n_sep",
    "n_suf",
    "n_suf_defined",
    "accuracy_fraction",
    "cross_entropy",
    "wall_time_s",
    "h_a",
    "h_a_given_y",
    "h_a_given_r",
    "status",
];

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(field: &str, column: &str, row: usize) -> Result<f64> {
    field.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("cannot parse `{field}` as a number"),
    })
}

fn parse_opt(field: &str, column: &str, row: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, column, row).map(Some)
    }
}

fn check_header(found: &csv::StringRecord, expected: &[String]) -> Result<()> {
    let found: Vec<&str> = found.iter().collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Schema(format!(
            "unexpected header `{}`, expected `{}`",
            found.join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

/// Writes records as CSV in sorted order.
pub fn persist_records(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RECORD_HEADER)?;
    for r in &sorted {
        let mut row = vec![r.dataset.clone(), r.kind.to_string(), fmt_f64(r.mu), r.fold.to_string()];
        match &r.metrics {
            Some(m) => {
                let rep = &m.report;
                row.extend([
                    fmt_f64(rep.ind),
                    fmt_f64(rep.sep),
                    fmt_f64(rep.suf),
                    fmt_f64(rep.acc),
                    fmt_f64(rep.bal),
                    fmt_opt(rep.n_ind),
                    fmt_opt(rep.n_sep),
                    fmt_opt(rep.n_suf),
                    rep.n_suf.is_some().to_string(),
                    fmt_f64(m.accuracy_fraction),
                    fmt_f64(m.cross_entropy),
                    fmt_f64(r.wall_time_s),
                    fmt_f64(rep.h_a),
                    fmt_f64(rep.h_a_given_y),
                    fmt_f64(rep.h_a_given_r),
                ]);
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), 11));
                row.push(fmt_f64(r.wall_time_s));
                row.extend(std::iter::repeat_n(String::new(), 3));
            }
        }
        row.push(r.status.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a records file written by [`persist_records`].
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let expected: Vec<String> = RECORD_HEADER.iter().map(|s| s.to_string()).collect();
    check_header(rdr.headers()?, &expected)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| parse_f64(get(c), RECORD_HEADER[c], row);
        let opt = |c: usize| parse_opt(get(c), RECORD_HEADER[c], row);
        let status: CellStatus = get(19).parse()?;
        let metrics = if status.is_failure() {
            None
        } else {
            Some(CellMetrics {
                report: FairnessReport {
                    ind: num(4)?,
                    sep: num(5)?,
                    suf: num(6)?,
                    acc: num(7)?,
                    bal: num(8)?,
                    n_ind: opt(9)?,
                    n_sep: opt(10)?,
                    n_suf: opt(11)?,
                    h_a: num(16)?,
                    h_a_given_y: num(17)?,
                    h_a_given_r: num(18)?,
                },
                accuracy_fraction: num(13)?,
                cross_entropy: num(14)?,
            })
        };
        out.push(SweepRecord {
            dataset: get(0).to_string(),
            kind: get(1).parse()?,
            mu: num(2)?,
            fold: get(3).parse().map_err(|_| Error::Parse {
                row,
                column: "fold".into(),
                message: format!("cannot parse `{}` as a fold index", get(3)),
            })?,
            metrics,
            wall_time_s: num(15)?,
            status,
        });
    }
    Ok(out)
}

/// Column names of a summary file, in order.
pub fn summary_header() -> Vec<String> {
    let mut h: Vec<String> = ["dataset", "kind", "mu", "folds", "complete"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in Metric::SUMMARY {
        h.push(format!("{}_mean", m.name()));
        h.push(format!("{}_std", m.name()));
    }
    h
}

pub fn persist_summary(summary: &SweepSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(summary_header())?;
    for r in &summary.rows {
        let mut row = vec![
            r.dataset.clone(),
            r.kind.to_string(),
            fmt_f64(r.mu),
            r.folds.to_string(),
            r.complete.to_string(),
        ];
        for s in &r.stats {
            row.push(fmt_opt(s.map(|s| s.mean)));
            row.push(fmt_opt(s.map(|s| s.std)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_summary(path: impl AsRef<Path>) -> Result<SweepSummary> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = summary_header();
    check_header(rdr.headers()?, &header)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let complete = match get(4) {
            "true" => true,
            "false" => false,
            other => return Err(Error::Schema(format!("row {row}: bad `complete` value `{other}`"))),
        };
        let mut stats = Vec::with_capacity(Metric::SUMMARY.len());
        for j in 0..Metric::SUMMARY.len() {
            let (mc, sc) = (5 + 2 * j, 6 + 2 * j);
            let mean = parse_opt(get(mc), &header[mc], row)?;
            let std = parse_opt(get(sc), &header[sc], row)?;
            stats.push(match (mean, std) {
                (Some(mean), Some(std)) => Some(Stat { mean, std }),
                (None, None) => None,
                _ => return Err(Error::Schema(format!("row {row}: `{}` has mean xor std", header[mc]))),
            });
        }
        rows.push(SummaryRow {
            dataset: get(0).to_string(),
            kind: get(1).parse()?,
            mu: parse_f64(get(2), "mu", row)?,
            folds: get(3)
                .parse()
                .map_err(|_| Error::Schema(format!("row {row}: bad fold count `{}`", get(3))))?,
            complete,
            stats,
        });
    }
    Ok(SweepSummary { rows })
}
