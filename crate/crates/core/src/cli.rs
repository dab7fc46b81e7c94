//! Command-line driver: tune λ, sweep μ, draw the figures.
//!
//! Everything is described by one TOML run file; a handful of flags override
//! its scalars. Exit codes: 0 when all requested work succeeded, 1 when some
//! sweep cells failed, 2 on any fatal error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, synthesize, Dataset, DatasetSpec, SyntheticSpec};
use crate::error::{Error, Result};
use crate::experiment::{
    default_mu_grid, load_records, normalize_mu_grid, persist_records, persist_summary, run_sweep,
    summarize, tune_lambda, SolverSettings, SweepRecord, SweepSummary,
};
use crate::regularizers::RegularizerKind;
use crate::report::{export_table, plot_figures, PlotStyle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "INFOFAIR_OUT";
pub const LAMBDA_FILE: &str = "lambda.toml";

#[derive(Debug, Parser)]
#[command(name = "infofair", version, about = "Fairness-regularized logistic regression sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "infofair.toml")]
    pub config: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Comma-separated regularizers, e.g. `IND,SEP`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub kinds: Option<Vec<RegularizerKind>>,
    /// Comma-separated μ values, e.g. `0,50,100`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Choose the L2 weight per dataset by cross-validation.
    TuneLambda,
    /// Train every (regularizer, μ, fold) cell.
    Sweep,
    /// Draw figures and export tables from stored records.
    Report,
    /// tune-lambda (where needed), sweep and report.
    All,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_k() -> usize {
    5
}

fn default_kinds() -> Vec<RegularizerKind> {
    RegularizerKind::ACTIVE.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
}

fn default_max_iter() -> usize {
    SolverSettings::default().max_iter
}

fn default_grad_tol() -> f64 {
    SolverSettings::default().grad_tol
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            grad_tol: default_grad_tol(),
        }
    }
}

/// λ candidates for cross-validation and/or fixed per-dataset values.
/// A fixed value wins over tuning.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    #[serde(default)]
    pub candidates: Vec<f64>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

/// One dataset: either a CSV file or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default)]
    pub csv: Option<DatasetSpec>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub palette: Option<Vec<String>>,
    pub x_label: Option<String>,
}

impl PlotConfig {
    pub fn style(&self) -> PlotStyle {
        let d = PlotStyle::default();
        PlotStyle {
            width: self.width.unwrap_or(d.width),
            height: self.height.unwrap_or(d.height),
            palette: self.palette.clone().unwrap_or(d.palette),
            x_label: self.x_label.clone().unwrap_or(d.x_label),
            y_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<RegularizerKind>,
    #[serde(default = "default_mu_grid")]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub lambda: LambdaConfig,
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub plot: PlotConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a run file; relative CSV paths are resolved against its directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if let Some(spec) = &mut d.csv {
                if spec.csv_path.is_relative() {
                    spec.csv_path = base.join(&spec.csv_path);
                }
            }
        }
        Ok(cfg)
    }

    /// Applies command-line overrides.
    pub fn apply(&mut self, cli: &Cli) {
        if let Some(seed) = cli.seed {
            self.seed = seed;
        }
        if let Some(out) = &cli.out {
            self.out_dir = out.clone();
        }
        if let Some(kinds) = &cli.kinds {
            self.kinds = kinds.clone();
        }
        if let Some(mu) = &cli.mu {
            self.mu = mu.clone();
        }
        if cli.jobs.is_some() {
            self.jobs = cli.jobs;
        }
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            let ok_name = !d.name.is_empty()
                && d.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok_name {
                return bad(format!("dataset name `{}` must be non-empty [A-Za-z0-9_-]", d.name));
            }
            if !names.insert(d.name.as_str()) {
                return bad(format!("dataset `{}` configured twice", d.name));
            }
            match (&d.csv, &d.synthetic) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => return bad(format!("dataset `{}` needs exactly one of `csv` or `synthetic`", d.name)),
            }
        }
        if let Some(unknown) = self.lambda.fixed.keys().find(|k| !names.contains(k.as_str())) {
            return bad(format!("fixed λ for unknown dataset `{unknown}`"));
        }
        if let Some(l) = self
            .lambda
            .fixed
            .values()
            .chain(&self.lambda.candidates)
            .find(|l| !l.is_finite() || **l < 0.0)
        {
            return bad(format!("λ value {l} is not a finite value ≥ 0"));
        }
        if self.k < 2 {
            return bad(format!("k = {} must be at least 2", self.k));
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        if self.kinds.is_empty() {
            return bad("no regularizer kinds selected".into());
        }
        if self.kinds.contains(&RegularizerKind::None) {
            return bad("`NONE` is not a sweepable regularizer".into());
        }
        normalize_mu_grid(&self.mu).map_err(|e| Error::Config(e.to_string()))?;
        if self.solver.max_iter == 0 {
            return bad("solver.max_iter must be at least 1".into());
        }
        if !self.solver.grad_tol.is_finite() || self.solver.grad_tol <= 0.0 {
            return bad("solver.grad_tol must be a positive number".into());
        }
        self.plot.style().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            max_iter: self.solver.max_iter,
            grad_tol: self.solver.grad_tol,
        }
    }

    pub fn mu_grid(&self) -> Result<Vec<f64>> {
        normalize_mu_grid(&self.mu)
    }

    pub fn kinds(&self) -> Vec<RegularizerKind> {
        let mut kinds = self.kinds.clone();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    /// Datasets whose λ must come from cross-validation.
    fn needs_tuning(&self) -> Vec<&str> {
        self.datasets
            .iter()
            .map(|d| d.name.as_str())
            .filter(|n| !self.lambda.fixed.contains_key(*n))
            .collect()
    }

    pub fn records_path(&self, dataset: &str) -> PathBuf {
        self.out_dir.join(format!("{dataset}_records.csv"))
    }

    pub fn summary_path(&self, dataset: &str) -> PathBuf {
        self.out_dir.join(format!("{dataset}_summary.csv"))
    }

    pub fn metadata_path(&self, dataset: &str) -> PathBuf {
        self.out_dir.join(format!("{dataset}_sweep.toml"))
    }

    pub fn lambda_path(&self) -> PathBuf {
        self.out_dir.join(LAMBDA_FILE)
    }
}

/// Builds one configured dataset; synthetic data is drawn from the run seed.
pub fn load_dataset(entry: &DatasetEntry, seed: u64) -> Result<Dataset<f64>> {
    let mut ds = match (&entry.csv, &entry.synthetic) {
        (Some(spec), _) => load_csv(entry.name.clone(), spec)?,
        (None, Some(spec)) => synthesize(*spec, seed)?,
        (None, None) => return Err(Error::Config(format!("dataset `{}` has no source", entry.name))),
    };
    ds.name = entry.name.clone();
    Ok(ds)
}

fn load_all(cfg: &RunConfig, names: &[&str]) -> Result<Vec<Dataset<f64>>> {
    cfg.datasets
        .iter()
        .filter(|d| names.contains(&d.name.as_str()))
        .map(|d| load_dataset(d, cfg.seed))
        .collect()
}

/// Settings a sweep ran with, stored next to its records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub dataset: String,
    pub lambda: f64,
    pub seed: u64,
    pub k: usize,
    pub kinds: Vec<RegularizerKind>,
    pub mu: Vec<f64>,
    /// `true` when the μ grid is the built-in 0, 5, ..., 100 default.
    pub default_mu_grid: bool,
    pub max_iter: usize,
    pub grad_tol: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct LambdaFile {
    lambda: BTreeMap<String, f64>,
}

pub fn read_lambda_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file: LambdaFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(file.lambda)
}

fn write_lambda_file(path: &Path, lambdas: &BTreeMap<String, f64>) -> Result<()> {
    let text = toml::to_string(&LambdaFile { lambda: lambdas.clone() })
        .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Picks λ for every dataset: fixed values as given, the rest by
/// cross-validation. Writes the full map to the λ file.
pub fn cmd_tune_lambda(cfg: &RunConfig) -> Result<BTreeMap<String, f64>> {
    let tune = cfg.needs_tuning();
    if !tune.is_empty() && cfg.lambda.candidates.is_empty() {
        return Err(Error::Config(format!(
            "no λ candidates and no fixed λ for {}",
            tune.join(", ")
        )));
    }
    let datasets = load_all(cfg, &tune)?;
    let mut lambdas = cfg.lambda.fixed.clone();
    for ds in &datasets {
        let sel = tune_lambda(ds, &cfg.lambda.candidates, cfg.k, cfg.seed, cfg.solver())?;
        for (l, score) in &sel.scores {
            eprintln!("{}: λ = {l:e} held-out cross-entropy {score:.6}", ds.name);
        }
        lambdas.insert(ds.name.clone(), sel.lambda);
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_lambda_file(&cfg.lambda_path(), &lambdas)?;
    for (name, l) in &lambdas {
        println!("{name}\t{l:e}");
    }
    Ok(lambdas)
}

fn resolve_lambdas(cfg: &RunConfig) -> Result<BTreeMap<String, f64>> {
    let mut lambdas = cfg.lambda.fixed.clone();
    let missing = cfg.needs_tuning();
    if missing.is_empty() {
        return Ok(lambdas);
    }
    let path = cfg.lambda_path();
    let stored = if path.exists() { read_lambda_file(&path)? } else { BTreeMap::new() };
    for name in missing {
        match stored.get(name) {
            Some(&l) => {
                lambdas.insert(name.to_string(), l);
            }
            None => {
                return Err(Error::Config(format!(
                    "no λ for dataset `{name}`: run tune-lambda or set lambda.fixed"
                )))
            }
        }
    }
    Ok(lambdas)
}

/// Cell counts of a finished sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOutcome {
    pub cells: usize,
    pub failed: usize,
    pub not_converged: usize,
}

impl SweepOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 {
            EXIT_OK
        } else if self.failed < self.cells {
            EXIT_PARTIAL
        } else {
            EXIT_FATAL
        }
    }
}

/// Runs the sweep for every dataset and writes records and summaries.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    let lambdas = resolve_lambdas(cfg)?;
    let names: Vec<&str> = cfg.datasets.iter().map(|d| d.name.as_str()).collect();
    let datasets = load_all(cfg, &names)?;
    let kinds = cfg.kinds();
    let mus = cfg.mu_grid()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outcome = SweepOutcome::default();
    for ds in &datasets {
        let lambda = lambdas[&ds.name];
        let records = run_sweep(ds, lambda, &kinds, &mus, cfg.k, cfg.seed, cfg.solver())?;
        for r in records.iter().filter(|r| r.status.is_failure()) {
            eprintln!("{} {} μ={} fold {}: {}", r.dataset, r.kind, r.mu, r.fold, r.status);
        }
        outcome.cells += records.len();
        outcome.failed += records.iter().filter(|r| r.status.is_failure()).count();
        outcome.not_converged += records
            .iter()
            .filter(|r| !r.status.is_failure() && r.status.to_string() != "ok")
            .count();
        persist_records(&records, cfg.records_path(&ds.name))?;
        persist_summary(&summarize(&records, cfg.k), cfg.summary_path(&ds.name))?;
        let meta = SweepMetadata {
            dataset: ds.name.clone(),
            lambda,
            seed: cfg.seed,
            k: cfg.k,
            kinds: kinds.clone(),
            mu: mus.clone(),
            default_mu_grid: mus == default_mu_grid(),
            max_iter: cfg.solver.max_iter,
            grad_tol: cfg.solver.grad_tol,
        };
        let text = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(cfg.metadata_path(&ds.name), text)?;
        println!("{}: λ = {lambda:e}, {} cells", ds.name, records.len());
    }
    if outcome.not_converged > 0 {
        eprintln!("{} cells stopped before reaching the gradient tolerance", outcome.not_converged);
    }
    if outcome.failed > 0 {
        eprintln!("{} of {} cells failed", outcome.failed, outcome.cells);
    }
    Ok(outcome)
}

/// Expected `(dataset, kind, μ, fold)` cells with no stored record.
pub fn missing_cells(cfg: &RunConfig, dataset: &str, records: &[SweepRecord]) -> Result<Vec<String>> {
    let have: BTreeSet<(RegularizerKind, u64, usize)> = records
        .iter()
        .map(|r| (r.kind, r.mu.to_bits(), r.fold))
        .collect();
    let mut missing = Vec::new();
    for kind in cfg.kinds() {
        for mu in cfg.mu_grid()? {
            for fold in 0..cfg.k {
                if !have.contains(&(kind, mu.to_bits(), fold)) {
                    missing.push(format!("{dataset}/{kind}/μ={mu}/fold {fold}"));
                }
            }
        }
    }
    Ok(missing)
}

/// Draws the figures for the requested kinds and exports summary tables.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let kinds = cfg.kinds();
    let mus = cfg.mu_grid()?;
    let mut summaries = Vec::new();
    let mut missing = Vec::new();
    for d in &cfg.datasets {
        let path = cfg.records_path(&d.name);
        let records = if path.exists() { load_records(&path)? } else { Vec::new() };
        missing.extend(missing_cells(cfg, &d.name, &records)?);
        let wanted: Vec<SweepRecord> = records
            .into_iter()
            .filter(|r| kinds.contains(&r.kind) && mus.iter().any(|m| m.to_bits() == r.mu.to_bits()))
            .collect();
        summaries.push(summarize(&wanted, cfg.k));
    }
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(20).map(String::as_str).collect();
        let more = missing.len().saturating_sub(shown.len());
        return Err(Error::Config(format!(
            "missing records for {} cells: {}{}",
            missing.len(),
            shown.join(", "),
            if more > 0 { format!(", and {more} more") } else { String::new() }
        )));
    }
    let tables = cfg.out_dir.join("tables");
    std::fs::create_dir_all(&tables)?;
    let mut written = Vec::new();
    for (d, s) in cfg.datasets.iter().zip(&summaries) {
        let path = tables.join(format!("{}_summary.csv", d.name));
        export_table(s, &path)?;
        written.push(path);
    }
    let merged = SweepSummary {
        rows: summaries.into_iter().flat_map(|s| s.rows).collect(),
    };
    written.extend(plot_figures(&[merged], &cfg.plot.style(), cfg.out_dir.join("plots"))?);
    println!("wrote {} files", written.len());
    Ok(written)
}

fn execute(cli: &Cli) -> Result<i32> {
    let mut cfg = RunConfig::from_path(&cli.config)?;
    cfg.apply(cli);
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cfg.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::TuneLambda => cmd_tune_lambda(&cfg).map(|_| EXIT_OK),
        Command::Sweep => cmd_sweep(&cfg).map(|o| o.exit_code()),
        Command::Report => cmd_report(&cfg).map(|_| EXIT_OK),
        Command::All => {
            if !cfg.needs_tuning().is_empty() {
                cmd_tune_lambda(&cfg)?;
            }
            let outcome = cmd_sweep(&cfg)?;
            if outcome.exit_code() == EXIT_FATAL {
                return Ok(EXIT_FATAL);
            }
            cmd_report(&cfg)?;
            Ok(outcome.exit_code())
        }
    })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FATAL
        }
    }
}
